#pragma once

// Exact dyadic rationals m / 2^e backed by GMP integers. Continuous-mode
// counters halve the junction inflow at every step, so their denominators
// grow without bound; doubles lose exactness after roughly a hundred steps.

#include <gmpxx.h>

#include <cmath>
#include <compare>
#include <string>

namespace netphase {

class Dyadic {
 public:
  Dyadic() = default;
  Dyadic(int v) : num_(v) {}
  Dyadic(long v) : num_(v) {}
  Dyadic(long long v) : num_(static_cast<long>(v)) {}
  /// Exact for any finite double (every double is dyadic).
  explicit Dyadic(double v) {
    num_ = v;  // integer part
    double frac = v - std::trunc(v);
    while (frac != 0.0) {
      num_ *= 2;
      frac *= 2;
      const double whole = std::trunc(frac);
      num_ += static_cast<long>(whole);
      frac -= whole;
      ++exp_;
    }
    normalize();
  }

  static Dyadic from_parts(mpz_class num, unsigned long exp) {
    Dyadic d;
    d.num_ = std::move(num);
    d.exp_ = exp;
    d.normalize();
    return d;
  }

  const mpz_class& numerator() const { return num_; }
  unsigned long exponent() const { return exp_; }

  double to_double() const {
    mpf_class f(num_, 64 + mpz_sizeinbase(num_.get_mpz_t(), 2));
    mpf_div_2exp(f.get_mpf_t(), f.get_mpf_t(), exp_);
    return f.get_d();
  }

  friend Dyadic operator+(const Dyadic& a, const Dyadic& b) { return combine(a, b, false); }
  friend Dyadic operator-(const Dyadic& a, const Dyadic& b) { return combine(a, b, true); }
  Dyadic& operator+=(const Dyadic& o) { return *this = *this + o; }
  Dyadic& operator-=(const Dyadic& o) { return *this = *this - o; }

  Dyadic half() const {
    Dyadic d = *this;
    if (d.num_ != 0) ++d.exp_;
    d.normalize();
    return d;
  }

  friend bool operator==(const Dyadic& a, const Dyadic& b) {
    return a.exp_ == b.exp_ && a.num_ == b.num_;
  }
  friend std::strong_ordering operator<=>(const Dyadic& a, const Dyadic& b) {
    int c;
    if (a.exp_ == b.exp_) {
      c = cmp(a.num_, b.num_);
    } else if (a.exp_ > b.exp_) {
      mpz_class t;
      mpz_mul_2exp(t.get_mpz_t(), b.num_.get_mpz_t(), a.exp_ - b.exp_);
      c = cmp(a.num_, t);
    } else {
      mpz_class t;
      mpz_mul_2exp(t.get_mpz_t(), a.num_.get_mpz_t(), b.exp_ - a.exp_);
      c = cmp(t, b.num_);
    }
    return c < 0 ? std::strong_ordering::less
                 : (c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
  }

  friend Dyadic floor(const Dyadic& d) {
    if (d.exp_ == 0) return d;
    mpz_class q;
    mpz_fdiv_q_2exp(q.get_mpz_t(), d.num_.get_mpz_t(), d.exp_);
    return from_parts(std::move(q), 0);
  }
  friend Dyadic ceil(const Dyadic& d) {
    if (d.exp_ == 0) return d;
    mpz_class q;
    mpz_cdiv_q_2exp(q.get_mpz_t(), d.num_.get_mpz_t(), d.exp_);
    return from_parts(std::move(q), 0);
  }

  /// "p" or "p/2^e" written out, e.g. "3/2".
  std::string str() const {
    if (exp_ == 0) return num_.get_str();
    mpz_class den;
    mpz_ui_pow_ui(den.get_mpz_t(), 2, exp_);
    return num_.get_str() + "/" + den.get_str();
  }

 private:
  static Dyadic combine(const Dyadic& a, const Dyadic& b, bool subtract) {
    Dyadic r;
    if (a.exp_ >= b.exp_) {
      mpz_mul_2exp(r.num_.get_mpz_t(), b.num_.get_mpz_t(), a.exp_ - b.exp_);
      if (subtract)
        mpz_sub(r.num_.get_mpz_t(), a.num_.get_mpz_t(), r.num_.get_mpz_t());
      else
        mpz_add(r.num_.get_mpz_t(), a.num_.get_mpz_t(), r.num_.get_mpz_t());
      r.exp_ = a.exp_;
    } else {
      mpz_mul_2exp(r.num_.get_mpz_t(), a.num_.get_mpz_t(), b.exp_ - a.exp_);
      if (subtract)
        mpz_sub(r.num_.get_mpz_t(), r.num_.get_mpz_t(), b.num_.get_mpz_t());
      else
        mpz_add(r.num_.get_mpz_t(), r.num_.get_mpz_t(), b.num_.get_mpz_t());
      r.exp_ = b.exp_;
    }
    r.normalize();
    return r;
  }

  void normalize() {
    if (exp_ == 0) return;
    if (num_ == 0) {
      exp_ = 0;
      return;
    }
    const auto tz = mpz_scan1(num_.get_mpz_t(), 0);
    const auto shift = tz < exp_ ? tz : exp_;
    if (shift > 0) {
      mpz_fdiv_q_2exp(num_.get_mpz_t(), num_.get_mpz_t(), shift);
      exp_ -= shift;
    }
  }

  mpz_class num_ = 0;
  unsigned long exp_ = 0;
};

inline Dyadic half_of(const Dyadic& v) { return v.half(); }
inline double to_double(const Dyadic& v) { return v.to_double(); }

}  // namespace netphase
