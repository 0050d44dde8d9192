#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vrrae/graph.hpp"
#include "vrrae/matrix.hpp"
#include "vrrae/rng.hpp"
#include "vrrae/svd.hpp"

namespace vrrae {

/// The four models of the main comparison plus the three ablation variants.
enum class Variant : std::uint8_t {
  Ae,
  Vae,
  Rrae,
  Vrrae,
  NaiveRraeVae,     // f trainable on the SVD coefficients
  VaeIdentityMean,  // VAE with f = I
  VrraeBetaZero,    // VRRAE trained without the KL term
};

bool is_svd_family(Variant v);     // latent bottleneck enforced by truncated SVD
bool is_variational(Variant v);    // samples alpha via the reparameterization trick
bool has_f_map(Variant v);
std::string variant_id(Variant v);          // stable CLI token, e.g. "vrrae"
std::string variant_label(Variant v);       // table label, e.g. "VRRAE (beta=0)"
std::optional<Variant> parse_variant(std::string_view id);

struct ModelSpec {
  Variant variant = Variant::Ae;
  Index input_dim = 0;   // D
  Index latent_dim = 0;  // L for the SVD family, k* otherwise
  Index bottleneck = 0;  // k*
  std::vector<Index> encoder_hidden{1024};
  std::vector<Index> decoder_hidden{1024, 1024};
  double beta = 0.0;

  /// beta actually applied to the KL term; VrraeBetaZero forces 0.
  double effective_beta() const { return variant == Variant::VrraeBetaZero ? 0.0 : beta; }
  void validate() const;
};

struct NamedParam {
  std::string name;
  Matrix value;
};

/// Parameters plus, for the SVD family after training, the frozen basis
/// used at inference in place of the per-batch SVD.
struct TrainedModel {
  ModelSpec spec;
  std::vector<NamedParam> params;
  std::optional<Matrix> inference_basis;  // L x k*, orthonormal columns

  Matrix& param(std::string_view name);
  const Matrix& param(std::string_view name) const;
};

/// Seed-deterministic initialization: weights LeCun-uniform (+-sqrt(3/fan_in)),
/// biases zero except g's bias at 1 so sigma starts near the prior scale.
TrainedModel init_model(const ModelSpec& spec, std::uint64_t seed);

struct ForwardOutput {
  Matrix recon;        // D x B
  Matrix mu;           // k* x B
  Matrix sigma;        // k* x B, variational variants only (else empty)
  Matrix alpha_tilde;  // k* x B; equals mu on deterministic paths
  std::optional<TruncatedFactors> factors;  // SVD family only
};

/// Handles into a training graph; `params` is parallel to model.params.
struct ForwardGraph {
  static constexpr Graph::NodeId none = 0xffffffff;
  Graph::NodeId x = none;
  std::vector<Graph::NodeId> params;
  Graph::NodeId recon = none;
  Graph::NodeId mu = none;
  Graph::NodeId sigma = none;
  Graph::NodeId alpha_tilde = none;
  Graph::NodeId s_values = none;  // k* x 1, SVD family only
  std::optional<TruncatedFactors> factors;
};

/// Records the train-mode forward pass on the tape. `noise` is the
/// reparameterization epsilon (k* x B); pass nullptr for the deterministic
/// mean path. SVD-family variants require batch >= k*.
ForwardGraph build_forward_graph(Graph& g, const TrainedModel& model, const Matrix& x,
                                 const Matrix* noise);

/// Train-mode forward with fresh noise; values only.
ForwardOutput forward_train(const TrainedModel& model, const Matrix& x, Rng& rng);

/// Inference path: the SVD family projects onto the frozen basis, variational
/// variants follow the mean path, nothing is sampled.
ForwardOutput forward_infer(const TrainedModel& model, const Matrix& x);

/// One full-dataset SVD of the encoded latents; stores U_bar as the
/// inference basis. Requires at least k* samples.
void finalize_basis(TrainedModel& model, const Matrix& x_full);

/// Plain (tape-free) encoder/decoder evaluation, shared by inference paths.
Matrix encode_eval(const TrainedModel& model, const Matrix& x);
Matrix decode_eval(const TrainedModel& model, const Matrix& z);

/// W*x + b for the named linear map ("f", "g", "enc0", ...).
Matrix linear_eval(const TrainedModel& model, const std::string& prefix, const Matrix& input);

}  // namespace vrrae
