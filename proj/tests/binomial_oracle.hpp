#pragma once

// Test-only arbitrary-precision oracle for the fair-coin binomial tail,
// kept independent of the implementation it checks: base-1e9 big integers
// built with Pascal's triangle (addition only) and a decimal long division.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace binomial_oracle {

struct BigNat {
  std::vector<uint32_t> limbs;  // base 1e9, little-endian

  static BigNat from_u32(uint32_t v) {
    BigNat b;
    if (v) b.limbs.push_back(v);
    return b;
  }

  static BigNat add(const BigNat& a, const BigNat& b) {
    BigNat r;
    uint64_t carry = 0;
    size_t n = std::max(a.limbs.size(), b.limbs.size());
    for (size_t i = 0; i < n || carry; ++i) {
      uint64_t s = carry;
      if (i < a.limbs.size()) s += a.limbs[i];
      if (i < b.limbs.size()) s += b.limbs[i];
      r.limbs.push_back(static_cast<uint32_t>(s % 1000000000u));
      carry = s / 1000000000u;
    }
    return r;
  }

  void double_in_place() { *this = add(*this, *this); }

  std::string to_decimal() const {
    if (limbs.empty()) return "0";
    std::string s = std::to_string(limbs.back());
    for (size_t i = limbs.size() - 1; i-- > 0;) {
      std::string part = std::to_string(limbs[i]);
      s += std::string(9 - part.size(), '0') + part;
    }
    return s;
  }

  // Decimal-string remainder used by the long division below.
  struct BigDec {
    std::string digits;

    void push_digit(int d) {
      digits.push_back(static_cast<char>('0' + d));
      size_t i = 0;
      while (i + 1 < digits.size() && digits[i] == '0') ++i;
      digits.erase(0, i);
    }
    int cmp_decimal(const std::string& other) const {
      std::string a = digits.empty() ? "0" : digits;
      if (a.size() != other.size()) return a.size() < other.size() ? -1 : 1;
      return a.compare(other) < 0 ? -1 : (a == other ? 0 : 1);
    }
    void sub_decimal(const std::string& other) {
      std::string a = digits;
      int borrow = 0;
      size_t ai = a.size(), oi = other.size();
      while (ai > 0) {
        --ai;
        int d = a[ai] - '0' - borrow;
        if (oi > 0) {
          --oi;
          d -= other[oi] - '0';
        }
        if (d < 0) {
          d += 10;
          borrow = 1;
        } else {
          borrow = 0;
        }
        a[ai] = static_cast<char>('0' + d);
      }
      size_t i = 0;
      while (i + 1 < a.size() && a[i] == '0') ++i;
      digits = a.substr(i);
    }
  };

  // this / denom as long double, via 80 extra decimal digits of quotient.
  long double divide(const BigNat& denom) const {
    std::string num = to_decimal();
    num.append(80, '0');
    std::string den = denom.to_decimal();
    std::string quot;
    BigDec rem;
    for (char c : num) {
      rem.push_digit(c - '0');
      int d = 0;
      while (rem.cmp_decimal(den) >= 0) {
        rem.sub_decimal(den);
        ++d;
      }
      quot.push_back(static_cast<char>('0' + d));
    }
    long double v = 0;
    for (char c : quot) v = v * 10.0L + (c - '0');
    return v / powl(10.0L, 80);
  }
};

// Row n of Pascal's triangle.
inline std::vector<BigNat> oracle_row(int n) {
  std::vector<BigNat> row(1, BigNat::from_u32(1));
  for (int r = 1; r <= n; ++r) {
    std::vector<BigNat> next(static_cast<size_t>(r) + 1);
    next[0] = BigNat::from_u32(1);
    next[static_cast<size_t>(r)] = BigNat::from_u32(1);
    for (int j = 1; j < r; ++j) {
      next[static_cast<size_t>(j)] =
          BigNat::add(row[static_cast<size_t>(j - 1)], row[static_cast<size_t>(j)]);
    }
    row = std::move(next);
  }
  return row;
}

inline long double oracle_tail(const std::vector<BigNat>& row, int k, int n) {
  BigNat tail;
  for (int i = k; i <= n; ++i) tail = BigNat::add(tail, row[static_cast<size_t>(i)]);
  BigNat denom = BigNat::from_u32(1);
  for (int i = 0; i < n; ++i) denom.double_in_place();
  if (tail.limbs.empty()) return 0.0L;
  return tail.divide(denom);
}

// Pr(X >= k), X ~ Binomial(n, 1/2), exact to well beyond double precision.
inline long double oracle_pvalue(int k, int n) { return oracle_tail(oracle_row(n), k, n); }

}  // namespace binomial_oracle
