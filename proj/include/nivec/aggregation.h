// nivec/aggregation.h

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

#ifndef NIVEC_AGGREGATION_H_
#define NIVEC_AGGREGATION_H_

#include <memory>
#include <string>
#include <vector>

#include "nivec/layers.h"

namespace nivec {

constexpr double kAggregationEpsilon = 1e-9;

// ---------------------------------------------------------------------------
// Posterior models.  Every posterior is a T x C matrix with rows on the
// simplex; component c owns column c.

struct GmmFullParams {
  Vector weights;             // C
  Matrix means;               // C x D
  std::vector<Matrix> covs;   // C matrices, D x D SPD

  int NumComponents() const { return static_cast<int>(weights.size()); }
  int Dim() const { return static_cast<int>(means.cols()); }
};

/// w_c N(x | mu_c, Sigma_c) normalized over components, with the Gaussian
/// densities evaluated through Cholesky factors of each covariance.
Matrix GmmPosteriorFull(const Matrix &x, const GmmFullParams &p);

/// The same posterior in bias form: softmax over
/// -1/2 (x - mu_c)' inv(Sigma_c) (x - mu_c) + beta_c with
/// beta_c = log(w_c / sqrt((2 pi)^D |Sigma_c|)).
Matrix GmmPosteriorExpanded(const Matrix &x, const GmmFullParams &p);

enum class LdeVariant { kIsotropic, kSharedDiagonal };

/// Isotropic: logits -1/2 s_c ||x - mu_c||^2 + beta_c, with s_c used as a
/// precision.  Shared diagonal: logits -1/2 sum_j d_j (x_j - mu_cj)^2 + beta_c.
/// `log_scales` holds log s (C entries) or log d (D entries).
Matrix LdePosterior(const Matrix &x, const Matrix &centroids, const Vector &log_scales,
                    const Vector &biases, LdeVariant variant);

/// softmax_c(omega_c' x + psi_c); omega is C x D.
Matrix NetVladPosterior(const Matrix &x, const Matrix &omega, const Vector &psi);

// ---------------------------------------------------------------------------
// Supervectors (length C * D, block c holds component c).

/// m_c = sum_t g_tc (mu_c - x_t) / (sum_t g_tc + eps).
Vector LdeAggregate(const Matrix &x, const Matrix &gamma, const Matrix &centroids);

/// v_c = sum_t g_tc (mu_c - x_t); m_c = v_c / (||v_c|| + eps); the
/// concatenation is then divided by (||m|| + eps).
Vector NetVladAggregate(const Matrix &x, const Matrix &gamma, const Matrix &centroids);

/// NetVLAD posteriors followed by LDE aggregation.
Vector HybridAggregate(const Matrix &x, const Matrix &omega, const Vector &psi,
                       const Matrix &centroids);

/// [mean_t x_t, sqrt(var_t x_t + eps)] with the population variance.
Vector MeanStdPool(const Matrix &x);

// ---------------------------------------------------------------------------
// Trainable heads.

enum class AggregationKind { kMeanStd, kLdeIsotropic, kLdeSharedDiag, kNetVlad, kHybrid };

const char *AggregationKindName(AggregationKind k);
/// "meanstd" | "lde-iso" | "lde-shared-diag" | "netvlad" | "hybrid"
AggregationKind ParseAggregationKind(const std::string &name);

class AggregationHead {
 public:
  virtual ~AggregationHead() = default;

  virtual AggregationKind kind() const = 0;
  int input_dim() const { return dim_; }
  int num_components() const { return num_components_; }  // 0 for mean+std
  virtual int output_dim() const = 0;

  /// One output row per sequence.
  virtual Matrix Forward(const Matrix &x, SeqShape shape, std::unique_ptr<Tape> *tape) const = 0;
  /// Accumulates parameter gradients; returns dL/dx.
  virtual Matrix Backward(const Tape &tape, const Matrix &dy) = 0;

  /// T x C posteriors of one sequence; throws for mean+std pooling.
  virtual Matrix Posteriors(const Matrix &x) const;
  /// Dictionary means (C x D); throws for mean+std pooling.
  virtual const Matrix &Centroids() const;

  virtual std::vector<Param *> Params() = 0;

 protected:
  AggregationHead(int dim, int num_components) : dim_(dim), num_components_(num_components) {}
  void CheckInput(const Matrix &x, SeqShape shape) const;

  int dim_;
  int num_components_;
};

class MeanStdHead : public AggregationHead {
 public:
  explicit MeanStdHead(int dim) : AggregationHead(dim, 0) {}

  AggregationKind kind() const override { return AggregationKind::kMeanStd; }
  int output_dim() const override { return 2 * dim_; }
  Matrix Forward(const Matrix &x, SeqShape shape, std::unique_ptr<Tape> *tape) const override;
  Matrix Backward(const Tape &tape, const Matrix &dy) override;
  std::vector<Param *> Params() override { return {}; }
};

/// Parameters: centroids (C x D), log scales (1 x C or 1 x D), biases (1 x C).
/// With use_bias false the biases stay at zero and are not trained.
class LdeHead : public AggregationHead {
 public:
  LdeHead(int dim, int num_components, LdeVariant variant, bool use_bias, Rng *rng);

  AggregationKind kind() const override;
  int output_dim() const override { return num_components_ * dim_; }
  Matrix Forward(const Matrix &x, SeqShape shape, std::unique_ptr<Tape> *tape) const override;
  Matrix Backward(const Tape &tape, const Matrix &dy) override;
  Matrix Posteriors(const Matrix &x) const override;
  const Matrix &Centroids() const override { return centroids_.value; }
  std::vector<Param *> Params() override;

  LdeVariant variant() const { return variant_; }
  bool use_bias() const { return use_bias_; }
  Param &centroids() { return centroids_; }
  Param &log_scales() { return log_scales_; }
  Param &biases() { return biases_; }

 private:
  LdeVariant variant_;
  bool use_bias_;
  Param centroids_, log_scales_, biases_;
};

/// Parameters: omega (C x D), psi (1 x C), centroids (C x D).  The hybrid
/// head shares the posterior model and switches to LDE aggregation.
class NetVladHead : public AggregationHead {
 public:
  NetVladHead(int dim, int num_components, bool hybrid, Rng *rng);

  AggregationKind kind() const override;
  int output_dim() const override { return num_components_ * dim_; }
  Matrix Forward(const Matrix &x, SeqShape shape, std::unique_ptr<Tape> *tape) const override;
  Matrix Backward(const Tape &tape, const Matrix &dy) override;
  Matrix Posteriors(const Matrix &x) const override;
  const Matrix &Centroids() const override { return centroids_.value; }
  std::vector<Param *> Params() override { return {&omega_, &psi_, &centroids_}; }

  Param &omega() { return omega_; }
  Param &psi() { return psi_; }
  Param &centroids() { return centroids_; }

 private:
  bool hybrid_;
  Param omega_, psi_, centroids_;
};

struct AggregationConfig {
  AggregationKind kind = AggregationKind::kLdeSharedDiag;
  int num_components = 64;
  bool use_bias = true;  // LDE only

  void Validate() const;
};

std::unique_ptr<AggregationHead> MakeAggregationHead(const AggregationConfig &config, int dim,
                                                     Rng *rng);

}  // namespace nivec

#endif  // NIVEC_AGGREGATION_H_
