#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "overnet/common.hpp"

namespace overnet {

// Exact scale factor. Keeping scales rational makes every output size an
// integer computation, so forward outputs and loss targets can never
// disagree by a rounding ulp.
struct Rational {
  std::int64_t num = 1;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
    if (d <= 0 || n <= 0) throw ConfigError("scale must be positive");
    const auto g = std::gcd(num, den);
    num /= g;
    den /= g;
  }

  double value() const {
    return static_cast<double>(num) / static_cast<double>(den);
  }

  // round(s * n) = floor(s * n + 1/2), in integers.
  std::size_t scale_up(std::size_t n) const {
    const std::int64_t sn = static_cast<std::int64_t>(n);
    return static_cast<std::size_t>((2 * num * sn + den) / (2 * den));
  }
  // round(n / s).
  std::size_t scale_down(std::size_t n) const {
    const std::int64_t sn = static_cast<std::int64_t>(n);
    return static_cast<std::size_t>((2 * den * sn + num) / (2 * num));
  }

  bool integral() const { return den == 1; }

  bool operator==(const Rational& o) const {
    return num == o.num && den == o.den;
  }
  bool operator<(const Rational& o) const { return num * o.den < o.num * den; }

  std::string str() const {
    if (den == 1) return std::to_string(num);
    // Exact decimal when the denominator divides a power of ten, exact
    // fraction form otherwise. parse() accepts both, so scale text survives
    // a round trip through configs and checkpoint headers unchanged.
    std::int64_t rest = den;
    int twos = 0, fives = 0;
    while (rest % 2 == 0) { rest /= 2; ++twos; }
    while (rest % 5 == 0) { rest /= 5; ++fives; }
    const int k = twos > fives ? twos : fives;
    if (rest != 1 || k > 18)
      return std::to_string(num) + "/" + std::to_string(den);
    std::int64_t p = 1;
    for (int i = 0; i < k; ++i) p *= 10;
    const std::int64_t q = p / den;
    if (num > std::numeric_limits<std::int64_t>::max() / q)
      return std::to_string(num) + "/" + std::to_string(den);
    const std::int64_t scaled = num * q;
    std::string frac = std::to_string(scaled % p);
    // k is minimal, so the last fractional digit is never zero.
    frac.insert(frac.begin(), static_cast<std::size_t>(k) - frac.size(), '0');
    return std::to_string(scaled / p) + "." + frac;
  }

  // Accepts "3", "2.5", ".5", and the fraction form "3/2". The whole string
  // must parse; a valid prefix with trailing junk is an error, not a value.
  static Rational parse(const std::string& s) {
    if (s.empty()) throw ConfigError("empty scale");
    const auto to_i64 = [&s](const std::string& t) -> std::int64_t {
      if (t.empty() || t.size() > 9) throw ConfigError("bad scale: " + s);
      std::int64_t v = 0;
      for (char c : t) {
        if (c < '0' || c > '9') throw ConfigError("bad scale: " + s);
        v = v * 10 + (c - '0');
      }
      return v;
    };
    const auto slash = s.find('/');
    if (slash != std::string::npos)
      return Rational(to_i64(s.substr(0, slash)),
                      to_i64(s.substr(slash + 1)));
    const auto dot = s.find('.');
    if (dot == std::string::npos) return Rational(to_i64(s), 1);
    const std::string whole = s.substr(0, dot), frac = s.substr(dot + 1);
    std::int64_t den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) den *= 10;
    const std::int64_t num =
        (whole.empty() ? 0 : to_i64(whole)) * den + to_i64(frac);
    return Rational(num, den);
  }
};

// Ordered target scales for training and evaluation.
struct ScaleSet {
  std::vector<Rational> scales;

  ScaleSet() = default;
  explicit ScaleSet(std::vector<Rational> s) : scales(std::move(s)) {
    if (scales.empty()) throw ConfigError("scale set must be non-empty");
    for (std::size_t i = 0; i < scales.size(); ++i) {
      if (scales[i].num <= scales[i].den)
        throw ConfigError("scales must be > 1");
      if (i > 0 && !(scales[i - 1] < scales[i]))
        throw ConfigError("scales must be strictly increasing");
    }
  }

  // Parses "2,3,4" or "1.5,2".
  static ScaleSet parse(const std::string& s) {
    std::vector<Rational> out;
    std::size_t start = 0;
    while (start <= s.size()) {
      auto comma = s.find(',', start);
      if (comma == std::string::npos) comma = s.size();
      std::string item = s.substr(start, comma - start);
      // trim
      while (!item.empty() && (item.front() == ' ' || item.front() == '\t'))
        item.erase(item.begin());
      while (!item.empty() && (item.back() == ' ' || item.back() == '\t'))
        item.pop_back();
      if (!item.empty()) out.push_back(Rational::parse(item));
      if (comma == s.size()) break;
      start = comma + 1;
    }
    return ScaleSet(std::move(out));
  }

  const Rational& max() const { return scales.back(); }

  std::string str() const {
    std::string out;
    for (std::size_t i = 0; i < scales.size(); ++i) {
      if (i) out += ',';
      out += scales[i].str();
    }
    return out;
  }

  void check_max(std::int64_t n, const char* what) const {
    if (max() < Rational(n, 1) || max() == Rational(n, 1)) return;
    throw ScaleError(std::string(what) + ": scale " + max().str() +
                     " exceeds the model maximum " + std::to_string(n));
  }
};

}  // namespace overnet
