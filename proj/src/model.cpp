#include "vrrae/model.hpp"

#include <cmath>

namespace vrrae {

bool is_svd_family(Variant v) {
  return v == Variant::Rrae || v == Variant::Vrrae || v == Variant::NaiveRraeVae ||
         v == Variant::VrraeBetaZero;
}

bool is_variational(Variant v) {
  return v == Variant::Vae || v == Variant::Vrrae || v == Variant::NaiveRraeVae ||
         v == Variant::VaeIdentityMean || v == Variant::VrraeBetaZero;
}

bool has_f_map(Variant v) { return v == Variant::Vae || v == Variant::NaiveRraeVae; }

std::string variant_id(Variant v) {
  switch (v) {
    case Variant::Ae: return "ae";
    case Variant::Vae: return "vae";
    case Variant::Rrae: return "rrae";
    case Variant::Vrrae: return "vrrae";
    case Variant::NaiveRraeVae: return "naive-rrae-vae";
    case Variant::VaeIdentityMean: return "vae-identity-mean";
    case Variant::VrraeBetaZero: return "vrrae-beta0";
  }
  return "?";
}

std::string variant_label(Variant v) {
  switch (v) {
    case Variant::Ae: return "AE";
    case Variant::Vae: return "VAE";
    case Variant::Rrae: return "RRAE";
    case Variant::Vrrae: return "VRRAE";
    case Variant::NaiveRraeVae: return "RRAE+VAE";
    case Variant::VaeIdentityMean: return "VAE (f=I)";
    case Variant::VrraeBetaZero: return "VRRAE (beta=0)";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view id) {
  for (Variant v : {Variant::Ae, Variant::Vae, Variant::Rrae, Variant::Vrrae,
                    Variant::NaiveRraeVae, Variant::VaeIdentityMean, Variant::VrraeBetaZero}) {
    if (variant_id(v) == id) return v;
  }
  return std::nullopt;
}

void ModelSpec::validate() const {
  if (input_dim == 0 || latent_dim == 0 || bottleneck == 0)
    throw ValueError("ModelSpec: dimensions must be positive");
  if (beta < 0.0) throw ValueError("ModelSpec: beta must be >= 0");
  if (is_svd_family(variant)) {
    if (bottleneck > latent_dim)
      throw ValueError("ModelSpec: bottleneck k*=" + std::to_string(bottleneck) +
                       " exceeds latent dimension L=" + std::to_string(latent_dim));
  } else if (latent_dim != bottleneck) {
    throw ValueError("ModelSpec: latent_dim must equal bottleneck k* for " +
                     variant_id(variant));
  }
}

Matrix& TrainedModel::param(std::string_view name) {
  for (auto& p : params)
    if (p.name == name) return p.value;
  throw Error("param: no parameter named " + std::string(name));
}

const Matrix& TrainedModel::param(std::string_view name) const {
  for (const auto& p : params)
    if (p.name == name) return p.value;
  throw Error("param: no parameter named " + std::string(name));
}

namespace {

std::vector<Index> encoder_widths(const ModelSpec& s) {
  std::vector<Index> w{s.input_dim};
  w.insert(w.end(), s.encoder_hidden.begin(), s.encoder_hidden.end());
  w.push_back(s.latent_dim);
  return w;
}

std::vector<Index> decoder_widths(const ModelSpec& s) {
  // the decoder consumes U*alpha (L-dim) for the SVD family, k* otherwise
  std::vector<Index> w{is_svd_family(s.variant) ? s.latent_dim : s.bottleneck};
  w.insert(w.end(), s.decoder_hidden.begin(), s.decoder_hidden.end());
  w.push_back(s.input_dim);
  return w;
}

void push_linear(std::vector<NamedParam>& params, const std::string& prefix, Index out,
                 Index in, Rng& rng, double bias_init, double weight_scale = 1.0) {
  double limit = weight_scale * std::sqrt(3.0 / static_cast<double>(in));
  params.push_back({prefix + ".w", rng.uniform_matrix(out, in, -limit, limit)});
  params.push_back({prefix + ".b", Matrix::constant(out, 1, bias_init)});
}

}  // namespace

TrainedModel init_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, 0x1217));
  TrainedModel model;
  model.spec = spec;

  auto enc = encoder_widths(spec);
  for (Index l = 0; l + 1 < enc.size(); ++l)
    push_linear(model.params, "enc" + std::to_string(l), enc[l + 1], enc[l], rng, 0.0);

  const Index k = spec.bottleneck;
  if (has_f_map(spec.variant)) push_linear(model.params, "f", k, k, rng, 0.0);
  // g starts as a near-constant map with sigma about 0.1: the noise scale has
  // to begin well below the coefficient scale or sampling drowns the
  // reconstruction signal for the whole fixed-epoch budget
  if (is_variational(spec.variant)) push_linear(model.params, "g", k, k, rng, 0.5, 0.01);

  auto dec = decoder_widths(spec);
  for (Index l = 0; l + 1 < dec.size(); ++l)
    push_linear(model.params, "dec" + std::to_string(l), dec[l + 1], dec[l], rng, 0.0);

  return model;
}

namespace {

struct GraphParams {
  Graph& g;
  const TrainedModel& model;
  std::vector<Graph::NodeId> ids;

  explicit GraphParams(Graph& graph, const TrainedModel& m) : g(graph), model(m) {
    ids.reserve(m.params.size());
    for (const auto& p : m.params) ids.push_back(g.leaf(p.value));
  }

  Graph::NodeId operator[](std::string_view name) const {
    for (Index i = 0; i < model.params.size(); ++i)
      if (model.params[i].name == name) return ids[i];
    throw Error("graph param: no parameter named " + std::string(name));
  }
};

Graph::NodeId linear_node(Graph& g, const GraphParams& params, const std::string& prefix,
                          Graph::NodeId input) {
  Graph::NodeId z = g.matmul(params[prefix + ".w"], input);
  Graph::NodeId b = g.broadcast_column(params[prefix + ".b"], g.value(z).cols());
  return g.add(z, b);
}

// hidden layers use tanh, the top layer stays linear
Graph::NodeId mlp_node(Graph& g, const GraphParams& params, const std::string& prefix,
                       Index layers, Graph::NodeId input) {
  Graph::NodeId h = input;
  for (Index l = 0; l < layers; ++l) {
    h = linear_node(g, params, prefix + std::to_string(l), h);
    if (l + 1 < layers) h = g.relu(h);
  }
  return h;
}

Matrix mlp_eval(const TrainedModel& m, const std::string& prefix, Index layers,
                const Matrix& input) {
  Matrix h = input;
  for (Index l = 0; l < layers; ++l) {
    h = linear_eval(m, prefix + std::to_string(l), h);
    if (l + 1 < layers)
      for (Index i = 0; i < h.size(); ++i) h.data()[i] = std::max(0.0, h.data()[i]);
  }
  return h;
}

}  // namespace

Matrix linear_eval(const TrainedModel& model, const std::string& prefix, const Matrix& input) {
  Matrix z = matmul(model.param(prefix + ".w"), input);
  const Matrix& b = model.param(prefix + ".b");
  for (Index j = 0; j < z.cols(); ++j)
    for (Index i = 0; i < z.rows(); ++i) z(i, j) += b(i, 0);
  return z;
}

ForwardGraph build_forward_graph(Graph& g, const TrainedModel& model, const Matrix& x,
                                 const Matrix* noise) {
  const ModelSpec& spec = model.spec;
  spec.validate();
  if (x.rows() != spec.input_dim)
    throw ShapeError("forward: input " + x.shape_str() + " does not match input_dim " +
                     std::to_string(spec.input_dim));
  const Index batch = x.cols();
  const Index k = spec.bottleneck;
  if (is_svd_family(spec.variant) && batch < k)
    throw ValueError("forward: batch " + std::to_string(batch) + " smaller than k*=" +
                     std::to_string(k) + " for " + variant_id(spec.variant));

  GraphParams params(g, model);
  ForwardGraph fg;
  fg.x = g.leaf(x);
  fg.params = params.ids;

  const Index enc_layers = spec.encoder_hidden.size() + 1;
  const Index dec_layers = spec.decoder_hidden.size() + 1;
  Graph::NodeId latent = mlp_node(g, params, "enc", enc_layers, fg.x);

  auto sample = [&](Graph::NodeId mu, Graph::NodeId sigma) {
    if (noise == nullptr) return mu;
    if (noise->rows() != k || noise->cols() != batch)
      throw ShapeError("forward: noise " + noise->shape_str() + " must be " +
                       std::to_string(k) + "x" + std::to_string(batch));
    return g.add(mu, g.hadamard(g.leaf(*noise), sigma));
  };

  switch (spec.variant) {
    case Variant::Ae: {
      fg.mu = latent;
      fg.alpha_tilde = latent;
      fg.recon = mlp_node(g, params, "dec", dec_layers, latent);
      break;
    }
    case Variant::Vae:
    case Variant::VaeIdentityMean: {
      fg.mu = has_f_map(spec.variant) ? linear_node(g, params, "f", latent) : latent;
      fg.sigma = linear_node(g, params, "g", latent);
      fg.alpha_tilde = sample(fg.mu, fg.sigma);
      fg.recon = mlp_node(g, params, "dec", dec_layers, fg.alpha_tilde);
      break;
    }
    case Variant::Rrae:
    case Variant::Vrrae:
    case Variant::NaiveRraeVae:
    case Variant::VrraeBetaZero: {
      Graph::SvdNodes svd = g.truncated_svd(latent, k);
      fg.s_values = svd.s;
      fg.factors = TruncatedFactors{g.value(svd.u), {}, g.value(svd.vt)};
      fg.factors->s_bar.resize(k);
      for (Index i = 0; i < k; ++i) fg.factors->s_bar[i] = g.value(svd.s)(i, 0);
      // alpha = diag(s) * Vt via broadcast + hadamard
      Graph::NodeId alpha = g.hadamard(g.broadcast_column(svd.s, batch), svd.vt);
      if (spec.variant == Variant::Rrae) {
        fg.mu = alpha;
        fg.alpha_tilde = alpha;
      } else {
        fg.mu = spec.variant == Variant::NaiveRraeVae ? linear_node(g, params, "f", alpha)
                                                      : alpha;  // f = I
        fg.sigma = linear_node(g, params, "g", fg.mu);
        fg.alpha_tilde = sample(fg.mu, fg.sigma);
      }
      Graph::NodeId lifted = g.matmul(svd.u, fg.alpha_tilde);
      fg.recon = mlp_node(g, params, "dec", dec_layers, lifted);
      break;
    }
  }
  return fg;
}

namespace {

ForwardOutput output_from_graph(const Graph& g, const ForwardGraph& fg) {
  ForwardOutput out;
  out.recon = g.value(fg.recon);
  out.mu = g.value(fg.mu);
  if (fg.sigma != ForwardGraph::none) out.sigma = g.value(fg.sigma);
  out.alpha_tilde = g.value(fg.alpha_tilde);
  out.factors = fg.factors;
  return out;
}

}  // namespace

ForwardOutput forward_train(const TrainedModel& model, const Matrix& x, Rng& rng) {
  Graph g;
  if (is_variational(model.spec.variant)) {
    Matrix eps = rng.normal_matrix(model.spec.bottleneck, x.cols());
    ForwardGraph fg = build_forward_graph(g, model, x, &eps);
    return output_from_graph(g, fg);
  }
  ForwardGraph fg = build_forward_graph(g, model, x, nullptr);
  return output_from_graph(g, fg);
}

Matrix encode_eval(const TrainedModel& model, const Matrix& x) {
  return mlp_eval(model, "enc", model.spec.encoder_hidden.size() + 1, x);
}

Matrix decode_eval(const TrainedModel& model, const Matrix& z) {
  return mlp_eval(model, "dec", model.spec.decoder_hidden.size() + 1, z);
}

ForwardOutput forward_infer(const TrainedModel& model, const Matrix& x) {
  const ModelSpec& spec = model.spec;
  spec.validate();
  ForwardOutput out;
  if (is_svd_family(spec.variant)) {
    if (!model.inference_basis)
      throw ValueError("forward_infer: model has no inference basis; train or finalize first");
    Matrix y = encode_eval(model, x);
    Matrix alpha = project(y, *model.inference_basis);
    out.mu = spec.variant == Variant::NaiveRraeVae ? linear_eval(model, "f", alpha)
                                                   : std::move(alpha);
    if (is_variational(spec.variant)) out.sigma = linear_eval(model, "g", out.mu);
    out.alpha_tilde = out.mu;
    out.recon = decode_eval(model, matmul(*model.inference_basis, out.alpha_tilde));
  } else {
    Matrix latent = encode_eval(model, x);
    out.mu = has_f_map(spec.variant) ? linear_eval(model, "f", latent) : latent;
    if (is_variational(spec.variant)) out.sigma = linear_eval(model, "g", latent);
    out.alpha_tilde = out.mu;
    out.recon = decode_eval(model, out.alpha_tilde);
  }
  return out;
}

void finalize_basis(TrainedModel& model, const Matrix& x_full) {
  if (!is_svd_family(model.spec.variant)) return;
  if (x_full.cols() < model.spec.bottleneck)
    throw ValueError("finalize_basis: need at least k*=" +
                     std::to_string(model.spec.bottleneck) + " samples, got " +
                     std::to_string(x_full.cols()));
  Matrix y = encode_eval(model, x_full);
  model.inference_basis = truncated_svd(y, model.spec.bottleneck).u_bar;
}

}  // namespace vrrae
