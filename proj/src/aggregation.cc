// nivec/aggregation.cc

// Copyright 2026  The nivec Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "nivec/aggregation.h"

#include <cmath>
#include <functional>
#include <numbers>

#include "nivec/error.h"

namespace nivec {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

void CheckGmm(const Matrix &x, const GmmFullParams &p) {
  const int c = p.NumComponents();
  NIVEC_CHECK(c >= 1, ErrorCode::kInvalidArgument, "gmm: no components");
  NIVEC_CHECK(p.means.rows() == c && static_cast<int>(p.covs.size()) == c,
              ErrorCode::kDimensionMismatch, "gmm: component count mismatch");
  NIVEC_CHECK(x.cols() == p.means.cols(), ErrorCode::kDimensionMismatch,
              "gmm: feature dim does not match means");
  NIVEC_CHECK((p.weights.array() > 0.0).all() && std::abs(p.weights.sum() - 1.0) <= 1e-12,
              ErrorCode::kInvalidArgument, "gmm: weights must be positive and sum to 1");
  for (const Matrix &s : p.covs)
    NIVEC_CHECK(s.rows() == p.means.cols() && s.cols() == p.means.cols(),
                ErrorCode::kDimensionMismatch, "gmm: covariance shape mismatch");
}

// Squared distances T x C, optionally weighted per dimension.
Matrix SquaredDistances(const Matrix &x, const Matrix &centroids, const Vector *dim_weights) {
  Matrix d2(x.rows(), centroids.rows());
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    Matrix diff = x.rowwise() - centroids.row(c);
    if (dim_weights)
      d2.col(c) = (diff.array().square().rowwise() * dim_weights->transpose().array()).rowwise().sum();
    else
      d2.col(c) = diff.array().square().rowwise().sum();
  }
  return d2;
}

Matrix LdeLogits(const Matrix &x, const Matrix &centroids, const Vector &scales,
                 const Vector &biases, LdeVariant variant) {
  Matrix logits;
  if (variant == LdeVariant::kIsotropic) {
    logits = SquaredDistances(x, centroids, nullptr);
    logits = (-0.5 * logits.array()).rowwise() * scales.transpose().array();
  } else {
    logits = -0.5 * SquaredDistances(x, centroids, &scales);
  }
  logits.rowwise() += biases.transpose();
  return logits;
}

void CheckLde(const Matrix &x, const Matrix &centroids, const Vector &log_scales,
              const Vector &biases, LdeVariant variant) {
  NIVEC_CHECK(centroids.rows() >= 1 && x.cols() == centroids.cols(), ErrorCode::kDimensionMismatch,
              "lde: feature dim does not match centroids");
  NIVEC_CHECK(biases.size() == centroids.rows(), ErrorCode::kDimensionMismatch,
              "lde: bias count mismatch");
  const Eigen::Index want = variant == LdeVariant::kIsotropic ? centroids.rows() : centroids.cols();
  NIVEC_CHECK(log_scales.size() == want, ErrorCode::kDimensionMismatch, "lde: scale count mismatch");
}

// Block c of the supervector viewed as row c of a C x D matrix.
Matrix AsBlocks(const Vector &v, int num_components, int dim) {
  return Eigen::Map<const Matrix>(v.data(), num_components, dim);
}

Vector Flatten(const Matrix &blocks) {
  return Eigen::Map<const Vector>(blocks.data(), blocks.size());
}

// Residual sums v_c = n_c mu_c - sum_t g_tc x_t (C x D) and soft counts n.
Matrix ResidualSums(const Matrix &x, const Matrix &gamma, const Matrix &centroids, Vector *counts) {
  *counts = gamma.colwise().sum().transpose();
  Matrix v = centroids.array().colwise() * counts->array();
  v.noalias() -= gamma.transpose() * x;
  return v;
}

void CheckAggregateShapes(const Matrix &x, const Matrix &gamma, const Matrix &centroids) {
  NIVEC_CHECK(x.rows() >= 1, ErrorCode::kInvalidArgument, "aggregate: empty input");
  NIVEC_CHECK(gamma.rows() == x.rows() && gamma.cols() == centroids.rows() &&
                  x.cols() == centroids.cols(),
              ErrorCode::kDimensionMismatch, "aggregate: shape mismatch");
}

// Gradient of y = u / (||u|| + eps) with respect to u.
Matrix NormalizeBackward(const Matrix &u, double norm, const Matrix &dy) {
  Matrix du = dy / (norm + kAggregationEpsilon);
  if (norm > 0.0) {
    double dot = (u.array() * dy.array()).sum();
    du -= u * (dot / (norm * (norm + kAggregationEpsilon) * (norm + kAggregationEpsilon)));
  }
  return du;
}

// Softmax backward: da = g * (dg - sum_c g dg).
Matrix SoftmaxBackward(const Matrix &gamma, const Matrix &dgamma) {
  Vector inner = (gamma.array() * dgamma.array()).rowwise().sum();
  return gamma.array() * (dgamma.colwise() - inner).array();
}

template <class T>
const T &TapeAs(const Tape &tape, const char *what) {
  const T *t = dynamic_cast<const T *>(&tape);
  if (t == nullptr) Fail(ErrorCode::kInvalidArgument, std::string(what) + ": tape mismatch");
  return *t;
}

}  // namespace

Matrix GmmPosteriorFull(const Matrix &x, const GmmFullParams &p) {
  CheckGmm(x, p);
  const int num = p.NumComponents();
  const double dim = static_cast<double>(p.Dim());
  Matrix log_post(x.rows(), num);
  for (int c = 0; c < num; ++c) {
    Matrix chol = Cholesky(p.covs[c]);
    double log_det = 2.0 * chol.diagonal().array().log().sum();
    Matrix diff = (x.rowwise() - p.means.row(c)).transpose();
    Matrix y = chol.triangularView<Eigen::Lower>().solve(diff);
    Vector maha = y.colwise().squaredNorm().transpose();
    log_post.col(c) = (std::log(p.weights(c)) - 0.5 * (dim * kLog2Pi + log_det)) -
                      0.5 * maha.array();
  }
  StableSoftmaxRows(&log_post);
  return log_post;
}

Matrix GmmPosteriorExpanded(const Matrix &x, const GmmFullParams &p) {
  CheckGmm(x, p);
  const int num = p.NumComponents();
  const double dim = static_cast<double>(p.Dim());
  Matrix logits(x.rows(), num);
  for (int c = 0; c < num; ++c) {
    Matrix precision = SpdInverse(p.covs[c]);
    double beta = std::log(p.weights(c)) - 0.5 * (dim * kLog2Pi + SpdLogDet(p.covs[c]));
    Matrix diff = x.rowwise() - p.means.row(c);
    logits.col(c) = -0.5 * ((diff * precision).array() * diff.array()).rowwise().sum() + beta;
  }
  StableSoftmaxRows(&logits);
  return logits;
}

Matrix LdePosterior(const Matrix &x, const Matrix &centroids, const Vector &log_scales,
                    const Vector &biases, LdeVariant variant) {
  CheckLde(x, centroids, log_scales, biases, variant);
  Matrix logits = LdeLogits(x, centroids, log_scales.array().exp().matrix(), biases, variant);
  StableSoftmaxRows(&logits);
  return logits;
}

Matrix NetVladPosterior(const Matrix &x, const Matrix &omega, const Vector &psi) {
  NIVEC_CHECK(omega.rows() >= 1 && omega.cols() == x.cols() && psi.size() == omega.rows(),
              ErrorCode::kDimensionMismatch, "netvlad: parameter shape mismatch");
  Matrix logits = x * omega.transpose();
  logits.rowwise() += psi.transpose();
  StableSoftmaxRows(&logits);
  return logits;
}

Vector LdeAggregate(const Matrix &x, const Matrix &gamma, const Matrix &centroids) {
  CheckAggregateShapes(x, gamma, centroids);
  Vector counts;
  Matrix v = ResidualSums(x, gamma, centroids, &counts);
  v.array().colwise() /= counts.array() + kAggregationEpsilon;
  return Flatten(v);
}

Vector NetVladAggregate(const Matrix &x, const Matrix &gamma, const Matrix &centroids) {
  CheckAggregateShapes(x, gamma, centroids);
  Vector counts;
  Matrix v = ResidualSums(x, gamma, centroids, &counts);
  Vector norms = v.rowwise().norm();
  v.array().colwise() /= norms.array() + kAggregationEpsilon;
  double total = v.norm();
  return Flatten(v / (total + kAggregationEpsilon));
}

Vector HybridAggregate(const Matrix &x, const Matrix &omega, const Vector &psi,
                       const Matrix &centroids) {
  return LdeAggregate(x, NetVladPosterior(x, omega, psi), centroids);
}

Vector MeanStdPool(const Matrix &x) {
  NIVEC_CHECK(x.rows() >= 1, ErrorCode::kInvalidArgument, "mean+std pooling: empty input");
  const Eigen::Index dim = x.cols();
  Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::RowVectorXd var =
      (x.rowwise() - mean).array().square().colwise().sum().matrix() / static_cast<double>(x.rows());
  Vector out(2 * dim);
  out.head(dim) = mean.transpose();
  out.tail(dim) = (var.array() + kAggregationEpsilon).sqrt().matrix().transpose();
  return out;
}

// ---------------------------------------------------------------- heads

const char *AggregationKindName(AggregationKind k) {
  switch (k) {
    case AggregationKind::kMeanStd: return "meanstd";
    case AggregationKind::kLdeIsotropic: return "lde-iso";
    case AggregationKind::kLdeSharedDiag: return "lde-shared-diag";
    case AggregationKind::kNetVlad: return "netvlad";
    case AggregationKind::kHybrid: return "hybrid";
  }
  return "unknown";
}

AggregationKind ParseAggregationKind(const std::string &name) {
  for (AggregationKind k : {AggregationKind::kMeanStd, AggregationKind::kLdeIsotropic,
                            AggregationKind::kLdeSharedDiag, AggregationKind::kNetVlad,
                            AggregationKind::kHybrid})
    if (name == AggregationKindName(k)) return k;
  Fail(ErrorCode::kConfig, "unknown aggregation '" + name + "'");
}

void AggregationHead::CheckInput(const Matrix &x, SeqShape shape) const {
  if (shape.num_seqs < 1 || shape.seq_len < 1)
    Fail(ErrorCode::kInvalidArgument, "aggregation: empty input");
  if (x.rows() != shape.Rows() || x.cols() != dim_)
    Fail(ErrorCode::kDimensionMismatch, "aggregation: input is " + std::to_string(x.rows()) + "x" +
                                            std::to_string(x.cols()) + ", expected " +
                                            std::to_string(shape.Rows()) + "x" +
                                            std::to_string(dim_));
}

Matrix AggregationHead::Posteriors(const Matrix &) const {
  Fail(ErrorCode::kInvalidArgument, "mean+std pooling has no posteriors");
}

const Matrix &AggregationHead::Centroids() const {
  Fail(ErrorCode::kInvalidArgument, "mean+std pooling has no dictionary");
}

namespace {

struct MeanStdTape : Tape {
  Matrix x;
  Matrix out;  // B x 2D
  SeqShape shape;
};

}  // namespace

Matrix MeanStdHead::Forward(const Matrix &x, SeqShape shape, std::unique_ptr<Tape> *tape) const {
  CheckInput(x, shape);
  Matrix out(shape.num_seqs, output_dim());
  for (int b = 0; b < shape.num_seqs; ++b)
    out.row(b) = MeanStdPool(x.middleRows(static_cast<Eigen::Index>(b) * shape.seq_len,
                                          shape.seq_len)).transpose();
  if (tape) {
    auto t = std::make_unique<MeanStdTape>();
    t->x = x;
    t->out = out;
    t->shape = shape;
    *tape = std::move(t);
  }
  return out;
}

Matrix MeanStdHead::Backward(const Tape &tape, const Matrix &dy) {
  const auto &t = TapeAs<MeanStdTape>(tape, "mean+std pooling");
  const int len = t.shape.seq_len;
  Matrix dx(t.x.rows(), dim_);
  for (int b = 0; b < t.shape.num_seqs; ++b) {
    const Eigen::Index base = static_cast<Eigen::Index>(b) * len;
    Eigen::RowVectorXd mean = t.out.row(b).head(dim_);
    Eigen::RowVectorXd stddev = t.out.row(b).tail(dim_);
    Eigen::RowVectorXd g_mean = dy.row(b).head(dim_) / len;
    Eigen::RowVectorXd coef = dy.row(b).tail(dim_).array() / (stddev.array() * len);
    for (int i = 0; i < len; ++i)
      dx.row(base + i) = g_mean.array() + coef.array() * (t.x.row(base + i) - mean).array();
  }
  return dx;
}

namespace {

// Shared per-batch record for the dictionary heads.
struct DictionaryTape : Tape {
  Matrix x;       // rows x D
  Matrix gamma;   // rows x C
  Matrix counts;  // B x C
  Matrix blocks;  // B x (C*D): LDE means or NetVLAD residual sums v
  SeqShape shape;
};

Matrix DictionaryForward(const Matrix &x, SeqShape shape, const Matrix &centroids, bool netvlad,
                         const std::function<Matrix(const Matrix &)> &posterior,
                         std::unique_ptr<Tape> *tape) {
  const int num = static_cast<int>(centroids.rows()), dim = static_cast<int>(centroids.cols());
  Matrix out(shape.num_seqs, static_cast<Eigen::Index>(num) * dim);
  std::unique_ptr<DictionaryTape> t;
  if (tape) {
    t = std::make_unique<DictionaryTape>();
    t->x = x;
    t->gamma.resize(x.rows(), num);
    t->counts.resize(shape.num_seqs, num);
    t->blocks.resize(shape.num_seqs, out.cols());
    t->shape = shape;
  }
  for (int b = 0; b < shape.num_seqs; ++b) {
    const Eigen::Index base = static_cast<Eigen::Index>(b) * shape.seq_len;
    Matrix xb = x.middleRows(base, shape.seq_len);
    Matrix gamma = posterior(xb);
    Vector counts;
    Matrix v = ResidualSums(xb, gamma, centroids, &counts);
    Matrix m;
    if (netvlad) {
      m = v;
      Vector norms = v.rowwise().norm();
      m.array().colwise() /= norms.array() + kAggregationEpsilon;
      m /= m.norm() + kAggregationEpsilon;
    } else {
      m = v.array().colwise() / (counts.array() + kAggregationEpsilon);
    }
    out.row(b) = Flatten(m).transpose();
    if (t) {
      t->gamma.middleRows(base, shape.seq_len) = gamma;
      t->counts.row(b) = counts.transpose();
      t->blocks.row(b) = Flatten(netvlad ? v : m).transpose();
    }
  }
  if (tape) *tape = std::move(t);
  return out;
}

// Backward through the aggregation step of one sequence.  Returns dL/dgamma
// (T x C), adds the direct terms to dx (T x D) and dcentroids (C x D).
Matrix AggregateBackward(const Matrix &x, const Matrix &gamma, const Vector &counts,
                         const Matrix &blocks, const Matrix &centroids, bool netvlad,
                         const Matrix &g, Eigen::Ref<Matrix> dx, Matrix *dcentroids) {
  Matrix dv;  // dL/dv_c where v_c = sum_t g_tc (mu_c - x_t)
  Matrix residual_term;
  if (netvlad) {
    const Matrix &v = blocks;
    Vector norms = v.rowwise().norm();
    Matrix u = v.array().colwise() / (norms.array() + kAggregationEpsilon);
    Matrix du = NormalizeBackward(u, u.norm(), g);
    dv.resize(v.rows(), v.cols());
    for (Eigen::Index c = 0; c < v.rows(); ++c)
      dv.row(c) = NormalizeBackward(v.row(c), norms(c), du.row(c));
    residual_term = centroids;
  } else {
    // m_c = v_c / (n_c + eps), so dm_c/dn_c = (mu_c - m_c) / (n_c + eps).
    dv = g.array().colwise() / (counts.array() + kAggregationEpsilon);
    residual_term = centroids - blocks;
  }
  Vector offsets = (dv.array() * residual_term.array()).rowwise().sum();
  Matrix dgamma = -(x * dv.transpose());
  dgamma.rowwise() += offsets.transpose();
  dx.noalias() -= gamma * dv;
  *dcentroids += Matrix(dv.array().colwise() * counts.array());
  return dgamma;
}

}  // namespace

LdeHead::LdeHead(int dim, int num_components, LdeVariant variant, bool use_bias, Rng *rng)
    : AggregationHead(dim, num_components), variant_(variant), use_bias_(use_bias) {
  NIVEC_CHECK(dim >= 1 && num_components >= 1, ErrorCode::kConfig, "lde: bad dimensions");
  centroids_ = Param("centroids", rng->NormalMatrix(num_components, dim, 0.5), true);
  const int num_scales = variant == LdeVariant::kIsotropic ? num_components : dim;
  log_scales_ = Param("log_scales", Matrix::Zero(1, num_scales), false);
  biases_ = Param("biases", Matrix::Zero(1, num_components), false);
}

AggregationKind LdeHead::kind() const {
  return variant_ == LdeVariant::kIsotropic ? AggregationKind::kLdeIsotropic
                                            : AggregationKind::kLdeSharedDiag;
}

std::vector<Param *> LdeHead::Params() {
  if (use_bias_) return {&centroids_, &log_scales_, &biases_};
  return {&centroids_, &log_scales_};
}

Matrix LdeHead::Posteriors(const Matrix &x) const {
  return LdePosterior(x, centroids_.value, log_scales_.value.row(0).transpose(),
                      biases_.value.row(0).transpose(), variant_);
}

Matrix LdeHead::Forward(const Matrix &x, SeqShape shape, std::unique_ptr<Tape> *tape) const {
  CheckInput(x, shape);
  return DictionaryForward(
      x, shape, centroids_.value, false, [this](const Matrix &xb) { return Posteriors(xb); }, tape);
}

Matrix LdeHead::Backward(const Tape &tape, const Matrix &dy) {
  const auto &t = TapeAs<DictionaryTape>(tape, "lde");
  const int len = t.shape.seq_len;
  const Matrix &mu = centroids_.value;
  const Vector scales = log_scales_.value.row(0).transpose().array().exp();
  Matrix dx = Matrix::Zero(t.x.rows(), dim_);
  for (int b = 0; b < t.shape.num_seqs; ++b) {
    const Eigen::Index base = static_cast<Eigen::Index>(b) * len;
    Matrix xb = t.x.middleRows(base, len);
    Matrix gamma = t.gamma.middleRows(base, len);
    Vector counts = t.counts.row(b).transpose();
    Matrix blocks = AsBlocks(t.blocks.row(b).transpose(), num_components_, dim_);
    Matrix g = AsBlocks(dy.row(b).transpose(), num_components_, dim_);
    Matrix dgamma = AggregateBackward(xb, gamma, counts, blocks, mu, false, g,
                                      dx.middleRows(base, len), &centroids_.grad);
    Matrix da = SoftmaxBackward(gamma, dgamma);  // T x C logit gradients
    if (use_bias_) biases_.grad.row(0) += da.colwise().sum();
    Vector row_sum = da.rowwise().sum();
    Vector col_sum = da.colwise().sum().transpose();
    if (variant_ == LdeVariant::kIsotropic) {
      // a_tc = -1/2 s_c ||x_t - mu_c||^2 + beta_c
      Matrix d2 = SquaredDistances(xb, mu, nullptr);
      log_scales_.grad.row(0) +=
          (-0.5 * (da.array() * d2.array()).colwise().sum() * scales.transpose().array()).matrix();
      Matrix das = da.array().rowwise() * scales.transpose().array();
      Vector das_row = das.rowwise().sum();
      dx.middleRows(base, len) += das * mu;
      dx.middleRows(base, len) -= (xb.array().colwise() * das_row.array()).matrix();
      Matrix dmu = das.transpose() * xb;
      Vector das_col = das.colwise().sum().transpose();
      dmu -= (mu.array().colwise() * das_col.array()).matrix();
      centroids_.grad += dmu;
    } else {
      // a_tc = -1/2 sum_j d_j (x_tj - mu_cj)^2 + beta_c
      Matrix dam = da * mu;  // T x D
      Eigen::RowVectorXd sq =
          (xb.array().square().colwise() * row_sum.array()).colwise().sum() -
          2.0 * (xb.array() * dam.array()).colwise().sum() +
          (mu.array().square().colwise() * col_sum.array()).colwise().sum();
      log_scales_.grad.row(0) += (-0.5 * sq.array() * scales.transpose().array()).matrix();
      Matrix dxb = dam - Matrix(xb.array().colwise() * row_sum.array());
      dx.middleRows(base, len) += Matrix(dxb.array().rowwise() * scales.transpose().array());
      Matrix dmu = da.transpose() * xb - Matrix(mu.array().colwise() * col_sum.array());
      centroids_.grad += Matrix(dmu.array().rowwise() * scales.transpose().array());
    }
  }
  return dx;
}

NetVladHead::NetVladHead(int dim, int num_components, bool hybrid, Rng *rng)
    : AggregationHead(dim, num_components), hybrid_(hybrid) {
  NIVEC_CHECK(dim >= 1 && num_components >= 1, ErrorCode::kConfig, "netvlad: bad dimensions");
  omega_ = Param("omega", rng->NormalMatrix(num_components, dim, 1.0 / std::sqrt(dim)), true);
  psi_ = Param("psi", Matrix::Zero(1, num_components), false);
  centroids_ = Param("centroids", rng->NormalMatrix(num_components, dim, 0.5), true);
}

AggregationKind NetVladHead::kind() const {
  return hybrid_ ? AggregationKind::kHybrid : AggregationKind::kNetVlad;
}

Matrix NetVladHead::Posteriors(const Matrix &x) const {
  return NetVladPosterior(x, omega_.value, psi_.value.row(0).transpose());
}

Matrix NetVladHead::Forward(const Matrix &x, SeqShape shape, std::unique_ptr<Tape> *tape) const {
  CheckInput(x, shape);
  return DictionaryForward(
      x, shape, centroids_.value, !hybrid_, [this](const Matrix &xb) { return Posteriors(xb); },
      tape);
}

Matrix NetVladHead::Backward(const Tape &tape, const Matrix &dy) {
  const auto &t = TapeAs<DictionaryTape>(tape, hybrid_ ? "hybrid" : "netvlad");
  const int len = t.shape.seq_len;
  Matrix dx = Matrix::Zero(t.x.rows(), dim_);
  for (int b = 0; b < t.shape.num_seqs; ++b) {
    const Eigen::Index base = static_cast<Eigen::Index>(b) * len;
    Matrix xb = t.x.middleRows(base, len);
    Matrix gamma = t.gamma.middleRows(base, len);
    Vector counts = t.counts.row(b).transpose();
    Matrix blocks = AsBlocks(t.blocks.row(b).transpose(), num_components_, dim_);
    Matrix g = AsBlocks(dy.row(b).transpose(), num_components_, dim_);
    Matrix dgamma = AggregateBackward(xb, gamma, counts, blocks, centroids_.value, !hybrid_, g,
                                      dx.middleRows(base, len), &centroids_.grad);
    Matrix da = SoftmaxBackward(gamma, dgamma);
    psi_.grad.row(0) += da.colwise().sum();
    omega_.grad.noalias() += da.transpose() * xb;
    dx.middleRows(base, len).noalias() += da * omega_.value;
  }
  return dx;
}

void AggregationConfig::Validate() const {
  if (kind != AggregationKind::kMeanStd)
    NIVEC_CHECK(num_components >= 1, ErrorCode::kConfig, "aggregation needs >= 1 component");
}

std::unique_ptr<AggregationHead> MakeAggregationHead(const AggregationConfig &config, int dim,
                                                     Rng *rng) {
  config.Validate();
  switch (config.kind) {
    case AggregationKind::kMeanStd: return std::make_unique<MeanStdHead>(dim);
    case AggregationKind::kLdeIsotropic:
      return std::make_unique<LdeHead>(dim, config.num_components, LdeVariant::kIsotropic,
                                       config.use_bias, rng);
    case AggregationKind::kLdeSharedDiag:
      return std::make_unique<LdeHead>(dim, config.num_components, LdeVariant::kSharedDiagonal,
                                       config.use_bias, rng);
    case AggregationKind::kNetVlad:
      return std::make_unique<NetVladHead>(dim, config.num_components, false, rng);
    case AggregationKind::kHybrid:
      return std::make_unique<NetVladHead>(dim, config.num_components, true, rng);
  }
  Fail(ErrorCode::kConfig, "unknown aggregation kind");
}

}  // namespace nivec
