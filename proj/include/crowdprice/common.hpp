#pragma once

#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace crowdprice {

/// Prices are whole cents everywhere.
using Cents = std::int64_t;

/// Raised when a problem admits no solution under its constraints
/// (budget below minimum, unreachable bound, deadline infeasible at max price).
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by input readers; carries the 1-based line number when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t line = 0)
        : std::runtime_error(line == 0 ? message : "line " + std::to_string(line) + ": " + message),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Raised when an instance exceeds a configured work cap.
class LimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dense row-major matrix.
template <typename T>
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    const std::vector<T>& data() const noexcept { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

/// 64-bit FNV-1a, used for stable content digests.
class Fnv1a64 {
public:
    void update(std::string_view bytes) noexcept {
        for (unsigned char ch : bytes) {
            state_ ^= ch;
            state_ *= 0x100000001b3ULL;
        }
    }

    template <typename T>
    void update_value(const T& value) noexcept {
        update(std::string_view(reinterpret_cast<const char*>(&value), sizeof(T)));
    }

    std::uint64_t value() const noexcept { return state_; }

    std::string hex() const {
        static constexpr char digits[] = "0123456789abcdef";
        std::string out(16, '0');
        std::uint64_t v = state_;
        for (int i = 15; i >= 0; --i) {
            out[static_cast<std::size_t>(i)] = digits[v & 0xF];
            v >>= 4;
        }
        return out;
    }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc()) throw std::runtime_error("number formatting failed");
    return std::string(buf, ptr);
}

inline std::string content_digest(std::string_view bytes) {
    Fnv1a64 h;
    h.update(bytes);
    return h.hex();
}

}  // namespace crowdprice
