#include "smpc/model.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "smpc/errors.hpp"

namespace smpc {

void LinearSystem::validate() const {
  const auto n = A.rows();
  if (n == 0 || A.cols() != n) throw Error(ErrorKind::Config, "model", "A must be square and nonempty");
  if (B.rows() != n || B.cols() == 0) throw Error(ErrorKind::Config, "model", "B must have n rows");
  if (Bw.rows() != n || Bw.cols() == 0) throw Error(ErrorKind::Config, "model", "Bw must have n rows");
  if (!A.allFinite() || !B.allFinite() || !Bw.allFinite())
    throw Error(ErrorKind::Config, "model", "system matrices must be finite");
}

void ConstraintSpec::validate(const LinearSystem& sys) const {
  if (H.rows() > 0 && H.cols() != sys.n()) throw Error(ErrorKind::Config, "model", "H must have n columns");
  if (h.size() != H.rows() || eps.size() != H.rows())
    throw Error(ErrorKind::Config, "model", "H, h and eps row counts disagree");
  if (G.rows() > 0 && G.cols() != sys.m()) throw Error(ErrorKind::Config, "model", "G must have m columns");
  if (g.size() != G.rows()) throw Error(ErrorKind::Config, "model", "G and g row counts disagree");
  auto level_ok = [](double e) { return e >= 0.0 && e < 1.0; };
  for (int j = 0; j < eps.size(); ++j)
    if (!level_ok(eps[j])) throw Error(ErrorKind::Config, "model", "state violation levels must lie in [0,1)");
  if (!level_ok(eps_u) || !level_ok(eps_T))
    throw Error(ErrorKind::Config, "model", "eps_u and eps_T must lie in [0,1)");
  if (T < 1) throw Error(ErrorKind::Config, "model", "horizon T must be positive");
}

Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5eedu};
  return Rng(seq);
}

Polytope ball_outer_polytope(int dim, double radius, int facets_2d) {
  if (dim == 1) return Polytope::box(Eigen::VectorXd::Constant(1, -radius), Eigen::VectorXd::Constant(1, radius));
  if (dim == 2) {
    if (facets_2d < 3) throw Error(ErrorKind::Config, "model", "outer polygon needs at least 3 facets");
    Eigen::MatrixXd F(facets_2d, 2);
    for (int k = 0; k < facets_2d; ++k) {
      const double th = 2.0 * std::numbers::pi * k / facets_2d;
      F(k, 0) = std::cos(th);
      F(k, 1) = std::sin(th);
    }
    return Polytope(F, Eigen::VectorXd::Constant(facets_2d, radius));
  }
  std::vector<Eigen::VectorXd> rows;
  for (int i = 0; i < dim; ++i) {
    rows.push_back(Eigen::VectorXd::Unit(dim, i));
    rows.push_back(-Eigen::VectorXd::Unit(dim, i));
  }
  const long corners = 1L << std::min(dim, 20);
  for (long s = 0; s < corners && rows.size() < 64; ++s) {
    Eigen::VectorXd a(dim);
    for (int i = 0; i < dim; ++i) a[i] = ((s >> i) & 1) ? -1.0 : 1.0;
    rows.push_back(a / std::sqrt(static_cast<double>(dim)));
  }
  Eigen::MatrixXd F(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) F.row(i) = rows[i].transpose();
  return Polytope(F, Eigen::VectorXd::Constant(rows.size(), radius));
}

DisturbanceModel DisturbanceModel::truncated_gaussian(const Eigen::MatrixXd& covariance, double truncation,
                                                      int outer_facets) {
  DisturbanceModel m;
  m.kind_ = DisturbanceKind::TruncatedGaussian;
  m.dim_ = static_cast<int>(covariance.rows());
  if (m.dim_ == 0 || covariance.cols() != m.dim_)
    throw Error(ErrorKind::Config, "model", "covariance must be square and nonempty");
  if (!(truncation > 0.0)) throw Error(ErrorKind::Config, "model", "truncation bound must be positive");
  m.covariance_ = covariance;
  m.truncation_ = truncation;
  m.outer_facets_ = outer_facets;
  if (covariance.isZero(0.0)) {
    m.chol_ = Eigen::MatrixXd::Zero(m.dim_, m.dim_);
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(covariance);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorKind::Config, "model", "covariance must be positive definite");
    m.chol_ = llt.matrixL();
  }
  if (covariance.isZero(0.0)) {
    m.support_ = Polytope::box(Eigen::VectorXd::Zero(m.dim_), Eigen::VectorXd::Zero(m.dim_));
  } else if (std::isfinite(truncation)) {
    m.support_ = ball_outer_polytope(m.dim_, std::sqrt(truncation), outer_facets);
  } else {
    m.support_ = Polytope::universe(m.dim_);
  }
  return m;
}

DisturbanceModel DisturbanceModel::sample_bank(std::vector<Eigen::VectorXd> samples) {
  if (samples.empty()) throw Error(ErrorKind::Config, "model", "sample bank is empty");
  DisturbanceModel m;
  m.kind_ = DisturbanceKind::SampleBank;
  m.dim_ = static_cast<int>(samples.front().size());
  Eigen::VectorXd lo = samples.front(), hi = samples.front();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m.dim_);
  for (const auto& s : samples) {
    if (s.size() != m.dim_) throw Error(ErrorKind::Config, "model", "sample bank dimensions disagree");
    lo = lo.cwiseMin(s);
    hi = hi.cwiseMax(s);
    mean += s;
  }
  mean /= static_cast<double>(samples.size());
  m.covariance_ = Eigen::MatrixXd::Zero(m.dim_, m.dim_);
  for (const auto& s : samples) m.covariance_ += (s - mean) * (s - mean).transpose();
  m.covariance_ /= static_cast<double>(samples.size());
  m.truncation_ = std::numeric_limits<double>::infinity();
  m.support_ = Polytope::box(lo, hi);
  m.bank_ = std::move(samples);
  return m;
}

DisturbanceModel DisturbanceModel::scaled(double s) const {
  if (kind_ == DisturbanceKind::SampleBank) {
    auto bank = bank_;
    for (auto& w : bank) w *= s;
    return sample_bank(std::move(bank));
  }
  DisturbanceModel m = *this;
  m.covariance_ = covariance_ * (s * s);
  m.chol_ = chol_ * s;
  m.truncation_ = truncation_ * s * s;
  if (std::isfinite(truncation_) || s == 0.0) {
    if (s == 0.0 || covariance_.isZero(0.0)) {
      m.support_ = Polytope::box(Eigen::VectorXd::Zero(dim_), Eigen::VectorXd::Zero(dim_));
    } else {
      m.support_ = ball_outer_polytope(dim_, std::sqrt(m.truncation_), outer_facets_);
    }
  }
  return m;
}

Eigen::VectorXd DisturbanceModel::sample(Rng& rng) const {
  if (kind_ == DisturbanceKind::SampleBank) {
    std::uniform_int_distribution<std::size_t> pick(0, bank_.size() - 1);
    return bank_[pick(rng)];
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(dim_);
  for (int attempt = 0; attempt < 1000000; ++attempt) {
    for (int i = 0; i < dim_; ++i) z[i] = normal(rng);
    Eigen::VectorXd w = chol_ * z;
    if (w.squaredNorm() <= truncation_) return w;
  }
  throw Error(ErrorKind::Config, "model", "disturbance sampler rejected 1e6 consecutive draws");
}

std::vector<Eigen::VectorXd> propagate_error(const LinearSystem& sys, const Eigen::MatrixXd& K,
                                             std::span<const Eigen::VectorXd> w_seq) {
  const Eigen::MatrixXd Acl = sys.A + sys.B * K;
  std::vector<Eigen::VectorXd> e;
  e.reserve(w_seq.size());
  Eigen::VectorXd cur = Eigen::VectorXd::Zero(sys.n());
  for (const auto& w : w_seq) {
    cur = Acl * cur + sys.Bw * w;
    e.push_back(cur);
  }
  return e;
}

}  // namespace smpc
