#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>

namespace nestrank {

// Base class for every error the toolkit raises on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Input/config errors (CLI exit status 2).
struct IoError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };
struct UnboundParameterError : ParseError { using ParseError::ParseError; };
struct NonAffineExpressionError : ParseError { using ParseError::ParseError; };
struct NotSupportedError : Error { using Error::Error; };
struct MalformedRowError : Error { using Error::Error; };
struct EmptyDatasetError : Error { using Error::Error; };
struct MissingWeightsError : Error { using Error::Error; };
struct ConfigRejectedError : Error { using Error::Error; };
struct InvalidPermutationError : Error { using Error::Error; };
struct TileSizeNonPositiveError : Error { using Error::Error; };

// Analysis errors (CLI exit status 1).
struct SpaceMismatchError : Error { using Error::Error; };
struct EmptySetError : Error { using Error::Error; };
struct UnboundedSpaceError : Error { using Error::Error; };
struct EmptyMachineError : Error { using Error::Error; };
struct EmptyInputError : Error { using Error::Error; };
struct DegeneratePairError : Error { using Error::Error; };
struct MissingMicrokernelSpecError : Error { using Error::Error; };
struct SpaceTooLargeError : Error { using Error::Error; };

// Exact rational on 64-bit numerator/denominator, always normalized with a
// positive denominator. Intermediate products go through __int128 so the
// cost sums in this project stay exact.
class Rational {
 public:
  Rational() = default;
  Rational(std::int64_t num) : num_(num), den_(1) {}  // NOLINT(google-explicit-constructor)
  Rational(std::int64_t num, std::int64_t den) : num_(num), den_(den) { normalize(); }

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }

  friend Rational operator+(const Rational& a, const Rational& b) {
    return from128(i128(a.num_) * b.den_ + i128(b.num_) * a.den_, i128(a.den_) * b.den_);
  }
  friend Rational operator-(const Rational& a, const Rational& b) {
    return from128(i128(a.num_) * b.den_ - i128(b.num_) * a.den_, i128(a.den_) * b.den_);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    return from128(i128(a.num_) * b.num_, i128(a.den_) * b.den_);
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num_ == 0) throw Error("rational division by zero");
    return from128(i128(a.num_) * b.den_, i128(a.den_) * b.num_);
  }
  Rational& operator+=(const Rational& o) { return *this = *this + o; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
  friend bool operator<(const Rational& a, const Rational& b) {
    return i128(a.num_) * b.den_ < i128(b.num_) * a.den_;
  }
  friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
  friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
  friend bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  std::string str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
  }

  // Parses "7", "-3/2" or decimal literals like "12.5".
  static Rational parse(const std::string& text) {
    if (text.empty()) throw ParseError("empty rational literal");
    auto slash = text.find('/');
    if (slash != std::string::npos) {
      return Rational(parse_int(text.substr(0, slash)), parse_int(text.substr(slash + 1)));
    }
    auto dot = text.find('.');
    if (dot == std::string::npos) return Rational(parse_int(text));
    std::string intpart = text.substr(0, dot);
    std::string frac = text.substr(dot + 1);
    if (frac.empty()) return Rational(parse_int(intpart));
    bool neg = !intpart.empty() && intpart[0] == '-';
    std::int64_t den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    std::int64_t whole = parse_int(intpart.empty() || intpart == "-" ? "0" : intpart);
    std::int64_t fnum = parse_int(frac);
    std::int64_t num = whole * den + (neg ? -fnum : fnum);
    return Rational(num, den);
  }

 private:
  using i128 = __int128;

  static Rational from128(i128 n, i128 d) {
    if (d == 0) throw Error("rational with zero denominator");
    if (d < 0) { n = -n; d = -d; }
    i128 g = gcd128(n < 0 ? -n : n, d);
    if (g > 1) { n /= g; d /= g; }
    if (n > INT64_MAX || n < INT64_MIN || d > INT64_MAX)
      throw Error("rational overflow");
    Rational r;
    r.num_ = static_cast<std::int64_t>(n);
    r.den_ = static_cast<std::int64_t>(d);
    return r;
  }

  static i128 gcd128(i128 a, i128 b) {
    while (b != 0) { i128 t = a % b; a = b; b = t; }
    return a == 0 ? 1 : a;
  }

  static std::int64_t parse_int(const std::string& s) {
    try {
      std::size_t pos = 0;
      std::int64_t v = std::stoll(s, &pos);
      if (pos != s.size()) throw ParseError("bad integer literal: " + s);
      return v;
    } catch (const std::logic_error&) {
      throw ParseError("bad integer literal: " + s);
    }
  }

  void normalize() {
    if (den_ == 0) throw Error("rational with zero denominator");
    if (den_ < 0) { num_ = -num_; den_ = -den_; }
    std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
    if (g > 1) { num_ /= g; den_ /= g; }
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

// floor/ceil division that round toward -inf / +inf for any sign mix.
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  return -floor_div(-a, b);
}

}  // namespace nestrank
