#ifdef DBE_HAVE_GMP

#include "dbe/rational.hpp"

#include <cmath>
#include <stdexcept>

namespace dbe::rational {
namespace {

mpz_class factorial(long long n) {
  if (n < 0) throw std::invalid_argument("rational: factorial of negative argument");
  mpz_class r;
  mpz_fac_ui(r.get_mpz_t(), static_cast<unsigned long>(n));
  return r;
}

// a (a+1) ... (a+n-1) over the integers
mpz_class pochhammer(long long a, long long n) {
  mpz_class r = 1;
  for (long long s = 0; s < n; ++s) r *= mpz_class(static_cast<long>(a + s));
  return r;
}

mpz_class ipow(long long base, long long e) {
  mpz_class r;
  mpz_ui_pow_ui(r.get_mpz_t(), static_cast<unsigned long>(base), static_cast<unsigned long>(e));
  return r;
}

// canonicalized rational from a (possibly negative) num/den pair
mpq_class frac(mpz_class num, mpz_class den) {
  mpq_class r(std::move(num));
  r /= mpq_class(std::move(den));
  return r;
}

mpq_class frac(long long num, long long den) {
  return frac(mpz_class(static_cast<long>(num)), mpz_class(static_cast<long>(den)));
}

}  // namespace

bool supported(const WeightModel& m) {
  return m.theta == 1.0 && !m.int_params.empty() &&
         (m.family == Family::krawtchouk || m.family == Family::multicut_krawtchouk ||
          m.family == Family::hahn_hexagon || m.family == Family::hexagon_hole);
}

mpq_class weight(const WeightModel& m, long long x) {
  const auto& ip = m.int_params;
  switch (m.family) {
    case Family::krawtchouk: {
      mpz_class b;
      mpz_bin_uiui(b.get_mpz_t(), static_cast<unsigned long>(ip[0]),
                   static_cast<unsigned long>(x));
      return {b};
    }
    case Family::multicut_krawtchouk: {
      long long k = ip[0];
      mpq_class w = 1;
      for (long long j = 0; j < k; ++j) {
        long long L = ip[1 + j], B = ip[1 + k + j];
        if (x >= L && x <= B) {
          w /= mpq_class(factorial(x - L) * factorial(B - x));
        } else if (x > B) {
          w *= frac(factorial(x - B - 1), factorial(x - L));
        } else {
          w *= frac(factorial(L - x - 1), factorial(B - x));
        }
      }
      return w;
    }
    case Family::hahn_hexagon: {
      long long B = ip[0], C = ip[1], t = ip[2], A = ip[4];
      return {pochhammer(A + B + C + 1 - t - x, t - B) * pochhammer(x, t - C)};
    }
    case Family::hexagon_hole: {
      long long B = ip[0], C = ip[1], t = ip[2], A = ip[4], H = ip[5], D = ip[6];
      mpz_class hole = pochhammer(H - x, D);
      return {pochhammer(A + B + C + 1 - t - x, t - B) * pochhammer(x, t - C) * hole * hole};
    }
    default:
      throw std::invalid_argument("rational: unsupported weight family");
  }
}

mpq_class phi_minus(const WeightModel& m, long long x) {
  const auto& ip = m.int_params;
  const long long N = m.N;
  switch (m.family) {
    case Family::krawtchouk:
      return frac(x, N);
    case Family::multicut_krawtchouk: {
      long long k = ip[0];
      mpq_class p = 1;
      for (long long j = 0; j < k; ++j) p *= frac(x - ip[1 + j], N);
      return p;
    }
    case Family::hahn_hexagon: {
      long long C = ip[1], A = ip[4];
      return frac((x - 1) * (A + C + 1 - x), N * N);
    }
    case Family::hexagon_hole: {
      long long C = ip[1], A = ip[4], H = ip[5], D = ip[6];
      mpq_class base = frac((x - 1) * (A + C + 1 - x), N * N);
      return base * frac((H + D - x) * (H + D - x), N * N);
    }
    default:
      throw std::invalid_argument("rational: unsupported weight family");
  }
}

mpq_class phi_plus(const WeightModel& m, long long x) {
  const auto& ip = m.int_params;
  const long long N = m.N;
  switch (m.family) {
    case Family::krawtchouk:
      return frac(ip[0] + 1 - x, N);
    case Family::multicut_krawtchouk: {
      long long k = ip[0];
      mpq_class p = (k % 2 == 1) ? 1 : -1;
      for (long long j = 0; j < k; ++j) p *= frac(ip[1 + k + j] + 1 - x, N);
      return p;
    }
    case Family::hahn_hexagon: {
      long long B = ip[0], C = ip[1], t = ip[2], A = ip[4];
      return frac((x + t - C - 1) * (A + B + C + 1 - t - x), N * N);
    }
    case Family::hexagon_hole: {
      long long B = ip[0], C = ip[1], t = ip[2], A = ip[4], H = ip[5];
      mpq_class base = frac((x + t - C - 1) * (A + B + C + 1 - t - x), N * N);
      return base * frac((H - x) * (H - x), N * N);
    }
    default:
      throw std::invalid_argument("rational: unsupported weight family");
  }
}

ExactRational build(const BuiltModel& bm, double cap) {
  if (!supported(bm.model))
    throw std::invalid_argument("rational: exact mode needs theta = 1 and a rational family");
  ExactRational ens;
  enumerate(
      bm.spec,
      [&](const ParticleConfig& c) {
        std::vector<long long> x(c.positions.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
          x[i] = std::llround(c.positions[i]);
          if (std::fabs(c.positions[i] - x[i]) > 1e-9)
            throw std::logic_error("rational: non-integer slot at theta = 1");
        }
        mpq_class m = 1;
        for (std::size_t i = 0; i < x.size(); ++i) {
          for (std::size_t j = i + 1; j < x.size(); ++j) {
            mpz_class g(static_cast<long>(x[j] - x[i]));
            m *= mpq_class(g * g);
          }
          m *= weight(bm.model, x[i]);
        }
        ens.configs.push_back(std::move(x));
        ens.mass.push_back(m);
      },
      cap);
  ens.Z = 0;
  for (const auto& m : ens.mass) ens.Z += m;
  if (ens.Z <= 0) throw std::runtime_error("rational: nonpositive partition function");
  return ens;
}

mpq_class nekrasov_residue(const ExactRational& ens, const WeightModel& model, long long m) {
  // residue of R_N at xi = m: -phi^-(m) sum_{l_i = m} P prod_{j != i}(1 - 1/(m - l_j))
  //                           +phi^+(m) sum_{l_i = m-1} P prod_{j != i}(1 + 1/(m - l_j - 1))
  mpq_class s_minus = 0, s_plus = 0;
  for (std::size_t c = 0; c < ens.configs.size(); ++c) {
    const auto& x = ens.configs[c];
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] == m) {
        mpq_class prod = ens.mass[c];
        for (std::size_t j = 0; j < x.size(); ++j) {
          if (j == i) continue;
          prod *= frac(m - x[j] - 1, m - x[j]);
        }
        s_minus += prod;
      }
      if (x[i] == m - 1) {
        mpq_class prod = ens.mass[c];
        for (std::size_t j = 0; j < x.size(); ++j) {
          if (j == i) continue;
          prod *= frac(m - x[j], m - x[j] - 1);
        }
        s_plus += prod;
      }
    }
  }
  mpq_class res = (phi_plus(model, m) * s_plus - phi_minus(model, m) * s_minus) / ens.Z;
  res.canonicalize();
  return res;
}

mpq_class krawtchouk_Z(int N, long long M) {
  mpq_class z(ipow(2, static_cast<long long>(N) * (M - N + 1)));
  mpz_class mf = factorial(M);
  for (int i = 0; i < N; ++i) z *= mpq_class(mf);
  for (long long j = 0; j < N; ++j) z *= frac(factorial(j), factorial(M - j));
  return z;
}

}  // namespace dbe::rational

#endif
