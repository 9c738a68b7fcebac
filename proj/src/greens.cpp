#include "ust3d/greens.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ust3d/sandpile.hpp"

namespace ust3d {

TopplingMatrix::TopplingMatrix(Domain d) : domain(std::move(d)), neighbours(domain.size()) {
  const int ndir = num_directions(domain.dim());
  for (std::size_t i = 0; i < domain.size(); ++i) {
    const Point p = domain.point_at(i);
    for (int k = 0; k < ndir; ++k) {
      const auto j = domain.index_of(shifted(p, k));
      if (j >= 0) neighbours[i].push_back(j);
    }
  }
}

std::int64_t TopplingMatrix::entry(std::size_t i, std::size_t j) const {
  if (i == j) return diagonal();
  const auto& nb = neighbours[i];
  return std::find(nb.begin(), nb.end(), static_cast<std::int64_t>(j)) != nb.end() ? -1 : 0;
}

std::size_t TopplingMatrix::bandwidth() const {
  std::size_t b = 0;
  for (std::size_t i = 0; i < size(); ++i)
    for (auto j : neighbours[i])
      b = std::max(b, static_cast<std::size_t>(std::llabs(static_cast<long long>(i) - j)));
  return b;
}

void TopplingMatrix::apply(const std::vector<double>& x, std::vector<double>& y) const {
  y.resize(size());
  const double diag = static_cast<double>(diagonal());
  for (std::size_t i = 0; i < size(); ++i) {
    double s = diag * x[i];
    for (auto j : neighbours[i]) s -= x[static_cast<std::size_t>(j)];
    y[i] = s;
  }
}

std::string rational_string(const mpq_class& q) {
  if (q.get_den() == 1) return q.get_num().get_str();
  return q.get_num().get_str() + "/" + q.get_den().get_str();
}

namespace {

// Fraction-free (Bareiss) elimination restricted to the band. Rows far below
// the current pivot are untouched apart from the common scale factor, which
// is the previous pivot; they are materialised when they enter the band.
struct BandedBareiss {
  std::size_t n = 0, b = 0;
  std::vector<std::vector<mpz_class>> rows;
  std::vector<mpz_class> rhs;
  std::vector<std::uint8_t> ready;
  const TopplingMatrix& m;

  BandedBareiss(const TopplingMatrix& mat, std::int64_t rhs_index)
      : n(mat.size()), b(mat.bandwidth()), rows(n), rhs(n), ready(n, 0), m(mat) {
    if (rhs_index >= 0) rhs[static_cast<std::size_t>(rhs_index)] = 1;
  }

  mpz_class& at(std::size_t i, std::size_t j) { return rows[i][j + b - i]; }

  void materialise(std::size_t i, const mpz_class& scale) {
    rows[i].assign(2 * b + 1, mpz_class(0));
    at(i, i) = scale * m.diagonal();
    for (auto j : m.neighbours[i]) at(i, static_cast<std::size_t>(j)) = -scale;
    rhs[i] *= scale;
    ready[i] = 1;
  }

  // Returns the determinant; the rows then hold the upper-triangular factor.
  mpz_class eliminate() {
    mpz_class prev = 1, t;
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t last = std::min(n - 1, k + b);
      for (std::size_t i = k; i <= last; ++i)
        if (!ready[i]) materialise(i, prev);
      const mpz_class pivot = at(k, k);
      if (pivot == 0) throw std::logic_error("toppling matrix: zero pivot");
      for (std::size_t i = k + 1; i <= last; ++i) {
        const mpz_class aik = at(i, k);
        const std::size_t jmax = std::min(n - 1, i + b);
        for (std::size_t j = k + 1; j <= jmax; ++j) {
          mpz_class& aij = at(i, j);
          t = pivot * aij;
          if (j <= k + b && aik != 0) t -= aik * at(k, j);
          mpz_divexact(aij.get_mpz_t(), t.get_mpz_t(), prev.get_mpz_t());
        }
        t = pivot * rhs[i];
        if (aik != 0) t -= aik * rhs[k];
        mpz_divexact(rhs[i].get_mpz_t(), t.get_mpz_t(), prev.get_mpz_t());
        at(i, k) = 0;
      }
      prev = pivot;
    }
    return prev;
  }
};

}  // namespace

mpz_class toppling_determinant(const Domain& domain) {
  if (domain.size() == 0) return 1;
  TopplingMatrix m(domain);
  BandedBareiss e(m, -1);
  return e.eliminate();
}

ExactColumn green_column_exact(const Domain& domain, const Point& y) {
  const auto yi = domain.index_of(y);
  if (yi < 0) throw std::out_of_range("green: site outside domain");
  TopplingMatrix m(domain);
  BandedBareiss e(m, yi);
  ExactColumn out;
  out.determinant = e.eliminate();
  const std::size_t n = m.size();
  // det * G is integral (adjugate), so back substitution stays in Z.
  std::vector<mpz_class> X(n);
  mpz_class t;
  for (std::size_t ii = n; ii-- > 0;) {
    t = out.determinant * e.rhs[ii];
    const std::size_t jmax = std::min(n - 1, ii + e.b);
    for (std::size_t j = ii + 1; j <= jmax; ++j) t -= e.at(ii, j) * X[j];
    mpz_divexact(X[ii].get_mpz_t(), t.get_mpz_t(), e.at(ii, ii).get_mpz_t());
  }
  out.column.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.column[i] = mpq_class(X[i], out.determinant);
    out.column[i].canonicalize();
  }
  return out;
}

namespace {

// Delta_K as a matrix-free operator: stride arithmetic on boxes, a flat
// neighbour table otherwise.
class Stencil {
 public:
  explicit Stencil(const Domain& d) : dom_(d), n_(d.size()), ndir_(num_directions(d.dim())) {
    if (!d.is_box()) {
      nbr_.resize(n_ * static_cast<std::size_t>(ndir_));
      for (std::size_t i = 0; i < n_; ++i) {
        const Point p = d.point_at(i);
        for (int k = 0; k < ndir_; ++k) nbr_[i * ndir_ + k] = d.index_of(shifted(p, k));
      }
    }
  }

  void apply(const std::vector<double>& x, std::vector<double>& y) const {
    const double diag = ndir_;
    if (!dom_.is_box()) {
      for (std::size_t i = 0; i < n_; ++i) {
        double s = diag * x[i];
        for (int k = 0; k < ndir_; ++k) {
          const auto j = nbr_[i * ndir_ + k];
          if (j >= 0) s -= x[static_cast<std::size_t>(j)];
        }
        y[i] = s;
      }
      return;
    }
    const std::int64_t s = 2 * static_cast<std::int64_t>(dom_.box_shape().radius) + 1;
    const int d = dom_.dim();
    const std::int64_t nz = d >= 3 ? s : 1;
    const std::int64_t ny = s;
    const std::int64_t nx = s;
    // Index = ((ix * ny) + iy) * nz + iz in 3D, ix * ny + iy in 2D.
    const std::int64_t sy = nz, sx = ny * nz;
    for (std::int64_t ix = 0; ix < nx; ++ix)
      for (std::int64_t iy = 0; iy < ny; ++iy)
        for (std::int64_t iz = 0; iz < nz; ++iz) {
          const std::int64_t i = ix * sx + iy * sy + iz;
          double v = diag * x[i];
          if (ix > 0) v -= x[i - sx];
          if (ix + 1 < nx) v -= x[i + sx];
          if (iy > 0) v -= x[i - sy];
          if (iy + 1 < ny) v -= x[i + sy];
          if (d >= 3) {
            if (iz > 0) v -= x[i - 1];
            if (iz + 1 < nz) v -= x[i + 1];
          }
          y[i] = v;
        }
  }

 private:
  const Domain& dom_;
  std::size_t n_;
  int ndir_;
  std::vector<std::int64_t> nbr_;
};

}  // namespace

IterativeColumn green_column_cg(const Domain& domain, const Point& y, double tol) {
  const auto yi = domain.index_of(y);
  if (yi < 0) throw std::out_of_range("green: site outside domain");
  if (domain.dim() < 2 || domain.dim() > 3) throw std::invalid_argument("green: dimension must be 2 or 3");
  const std::size_t n = domain.size();
  Stencil op(domain);
  IterativeColumn out;
  auto& x = out.column;
  x.assign(n, 0.0);
  std::vector<double> r(n, 0.0), p(n, 0.0), ap(n, 0.0);
  r[static_cast<std::size_t>(yi)] = 1.0;
  p = r;
  double rr = 1.0;
  auto max_abs = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double a : v) m = std::max(m, std::abs(a));
    return m;
  };
  const std::int64_t max_iter = 20 * static_cast<std::int64_t>(n) + 100;
  for (out.iterations = 0; out.iterations < max_iter; ++out.iterations) {
    op.apply(p, ap);
    double pap = 0.0;
    for (std::size_t i = 0; i < n; ++i) pap += p[i] * ap[i];
    const double a = rr / pap;
    double rr_new = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += a * p[i];
      r[i] -= a * ap[i];
      rr_new += r[i] * r[i];
    }
    if (max_abs(r) < tol) {
      // Confirm with a true residual; recursion drift can hide error.
      op.apply(x, ap);
      ap[static_cast<std::size_t>(yi)] -= 1.0;
      out.residual = max_abs(ap);
      if (out.residual < tol) {
        ++out.iterations;
        return out;
      }
      for (std::size_t i = 0; i < n; ++i) r[i] = -ap[i];
      p = r;
      rr = 0.0;
      for (double v : r) rr += v * v;
      continue;
    }
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  throw std::runtime_error("green: conjugate gradients did not converge");
}

GreenValue green_finite(const Domain& domain, const Point& x, const Point& y) {
  const auto xi = domain.index_of(x);
  if (xi < 0 || domain.index_of(y) < 0) throw std::out_of_range("green: site outside domain");
  GreenValue g;
  if (domain.size() <= kExactGreenLimit) {
    auto col = green_column_exact(domain, y);
    g.exact = col.column[static_cast<std::size_t>(xi)];
    g.value = g.exact->get_d();
  } else {
    g.value = green_column_cg(domain, y, 1e-13).column[static_cast<std::size_t>(xi)];
  }
  return g;
}

FullGreen green_full_origin(double tol, int dim, std::int32_t max_radius) {
  if (!(tol > 0.0)) throw std::invalid_argument("green_full_origin: tol must be positive");
  if (dim < 3) throw std::invalid_argument("green_full_origin: walk is recurrent for d < 3");
  if (dim > 3) throw std::invalid_argument("green_full_origin: d > 3 unsupported");
  FullGreen out;
  auto g_box = [&](std::int32_t r) {
    const Domain d = Domain::box(r, dim);
    const double v = green_column_cg(d, Point::origin(dim), 1e-13)
                         .column[static_cast<std::size_t>(d.index_of(Point::origin(dim)))];
    out.sequence.emplace_back(r, v);
    return v;
  };
  std::int32_t r = 4;
  double g_prev = g_box(r);
  std::optional<double> extra_prev;
  while (2 * r <= max_radius) {
    const double g = g_box(2 * r);
    const double extra = 2.0 * g - g_prev;
    r *= 2;
    out.radius = r;
    out.last_box = g;
    out.value = extra;
    if (extra_prev && std::abs(extra - *extra_prev) < tol) return out;
    extra_prev = extra;
    g_prev = g;
  }
  throw std::runtime_error("green_full_origin: no convergence within max_radius");
}

namespace {

struct MomentAcc {
  std::int64_t n = 0;
  std::int64_t sum = 0;
  // Squares can exceed 2^63 only for absurd toppling counts; keep them exact.
  __int128 sumsq = 0;
  void merge(const MomentAcc& o) {
    n += o.n;
    sum += o.sum;
    sumsq += o.sumsq;
  }
};

}  // namespace

DharReport dhar_check(const Domain& domain, const Point& v, const Point& x, std::int64_t reps,
                      RngSeed seed, int workers, const RunControl& control) {
  if (!domain.contains(v) || !domain.contains(x)) throw std::out_of_range("dhar_check: site outside domain");
  if (reps <= 0) throw std::invalid_argument("dhar_check: reps must be positive");
  DharReport rep;
  const GreenValue g = green_finite(domain, v, x);
  rep.green = g.value;
  rep.green_exact = g.exact;
  MomentAcc acc;
  AvalancheOptions opts;
  opts.record_waves = false;
  const auto status = run_replicas(
      reps, workers, acc,
      [&](std::int64_t r, MomentAcc& a) {
        LazySandpile pile(domain, seed.replica(static_cast<std::uint64_t>(r)));
        const auto res = run_avalanche(pile, v, opts);
        const std::int64_t k = res.topplings_at(x);
        ++a.n;
        a.sum += k;
        a.sumsq += static_cast<__int128>(k) * k;
      },
      control);
  rep.reps = acc.n;
  rep.stopped_early = status.stopped_early;
  if (acc.n > 0) {
    const double n = static_cast<double>(acc.n);
    rep.mean = static_cast<double>(acc.sum) / n;
    const double var =
        acc.n > 1 ? (static_cast<double>(acc.sumsq) - n * rep.mean * rep.mean) / (n - 1.0) : 0.0;
    rep.stderr_ = std::sqrt(std::max(var, 0.0) / n);
    rep.z = rep.stderr_ > 0 ? (rep.mean - rep.green) / rep.stderr_ : 0.0;
  }
  return rep;
}

nlohmann::json matrix_json(const TopplingMatrix& m) {
  nlohmann::json j;
  j["size"] = m.size();
  j["sites"] = m.domain.points();
  nlohmann::json nz = nlohmann::json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    nz.push_back({i, i, m.diagonal()});
    for (auto k : m.neighbours[i]) nz.push_back({i, k, -1});
  }
  j["nonzeros"] = nz;
  return j;
}

nlohmann::json green_json(const Domain& domain, const Point& x, const Point& y,
                          const GreenValue& g) {
  nlohmann::json j{{"x", x}, {"y", y}, {"sites", domain.size()}, {"value", g.value}};
  j["exact"] = g.exact ? nlohmann::json(rational_string(*g.exact)) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json dhar_json(const DharReport& r) {
  nlohmann::json j{{"reps", r.reps},   {"mean", r.mean}, {"stderr", r.stderr_},
                   {"green", r.green}, {"z", r.z},       {"stopped_early", r.stopped_early}};
  j["green_exact"] = r.green_exact ? nlohmann::json(rational_string(*r.green_exact))
                                   : nlohmann::json(nullptr);
  return j;
}

}  // namespace ust3d
