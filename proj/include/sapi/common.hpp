#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace sapi {

inline constexpr double kTickSeconds = 0.4;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    double squared_norm() const { return x * x + y * y; }

    Vec2 normalized() const {
        double n = norm();
        return n > 0.0 ? Vec2{x / n, y / n} : Vec2{0.0, 0.0};
    }
    // 90-degree counterclockwise rotation of this vector.
    Vec2 perp() const { return {-y, x}; }

    bool operator==(const Vec2& o) const { return x == o.x && y == o.y; }
};

inline Vec2 heading_vec(double heading) { return {std::cos(heading), std::sin(heading)}; }

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Base for all domain errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class NotOnRoad : public Error {
public:
    explicit NotOnRoad(const std::string& msg) : Error(msg) {}
};

class UnknownSegment : public Error {
public:
    explicit UnknownSegment(const std::string& msg) : Error(msg) {}
};

class DegenerateGeometry : public Error {
public:
    explicit DegenerateGeometry(const std::string& msg) : Error(msg) {}
};

class ShapeMismatch : public Error {
public:
    explicit ShapeMismatch(const std::string& msg) : Error(msg) {}
};

class InsufficientHistory : public Error {
public:
    explicit InsufficientHistory(const std::string& msg) : Error(msg) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

class SchemaVersionMismatch : public Error {
public:
    explicit SchemaVersionMismatch(const std::string& msg) : Error(msg) {}
};

class DivergenceDetected : public Error {
public:
    explicit DivergenceDetected(const std::string& msg) : Error(msg) {}
};

class MissingCheckpoint : public Error {
public:
    explicit MissingCheckpoint(const std::string& msg) : Error(msg) {}
};

class UnknownSample : public Error {
public:
    explicit UnknownSample(const std::string& msg) : Error(msg) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class IndexOutOfRange : public Error {
public:
    explicit IndexOutOfRange(const std::string& msg) : Error(msg) {}
};

// Deterministic uniform helpers on top of a caller-owned engine. The standard
// distributions are implementation-defined, so anything that must regenerate
// byte-identical artifacts goes through these instead.
template <typename Rng>
double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename Rng>
double uniform_in(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

template <typename Rng>
std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    // Modulo bias is irrelevant at these ranges (n << 2^64).
    return n == 0 ? 0 : rng() % n;
}

}  // namespace sapi
