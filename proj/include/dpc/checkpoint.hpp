#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dpc/benchmarks.hpp"
#include "dpc/dpc.hpp"
#include "dpc/io.hpp"
#include "dpc/train.hpp"

namespace dpc {

/// A training state together with what is needed to rebuild its known physics.
struct Checkpoint {
  nlohmann::json benchmark;  // benchmark_to_json
  std::uint64_t train_seed = 0;
  TrainState state;
  nlohmann::json extra = nlohmann::json::object();
};

namespace detail {

inline nlohmann::json standardizer_json(const Standardizer& s) {
  return {{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
          {"scale", std::vector<double>(s.scale.data(), s.scale.data() + s.scale.size())}};
}

inline Standardizer standardizer_from_json(const nlohmann::json& j) {
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto scale = j.at("scale").get<std::vector<double>>();
  if (mean.size() != scale.size()) throw IoError("checkpoint: standardizer lengths differ");
  Standardizer s{RowVector(static_cast<Eigen::Index>(mean.size())),
                 RowVector(static_cast<Eigen::Index>(scale.size()))};
  for (std::size_t k = 0; k < mean.size(); ++k) {
    s.mean[static_cast<Eigen::Index>(k)] = mean[k];
    s.scale[static_cast<Eigen::Index>(k)] = scale[k];
  }
  return s;
}

}  // namespace detail

/// Layout: "DPCCKPT1" | u32 version | u64 header length | JSON header | raw tensors.
/// Tensors follow in header "tensors" order, each column-major float64: the trainable
/// parameters, then Adam first moments, then Adam second moments.
inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  const TrainState& st = ck.state;
  DpcModel model = st.model;
  const std::vector<Matrix*> params = model.trainable();
  if (st.adam.first_moment.size() != params.size())
    throw ContractError("save_checkpoint: optimizer state does not match the model");
  nlohmann::json shapes = nlohmann::json::array();
  for (const Matrix* p : params) shapes.push_back({p->rows(), p->cols()});
  nlohmann::json history = nlohmann::json::array();
  for (const EpochRecord& r : st.history)
    history.push_back({r.epoch, r.lr, r.loss, r.lambda, r.beta_in, r.beta_out, r.wall_seconds,
                       r.skipped_batches});
  const nlohmann::json header = {
      {"benchmark", ck.benchmark},
      {"regime", model.regime},
      {"data_only", model.data_only},
      {"latent_dim", model.latent_dim},
      {"dt", model.dt},
      {"train_steps", model.train_steps},
      {"dims", model.net.dims},
      {"drift_scale", model.drift_scale},
      {"diffusion_scale", model.diffusion_scale},
      {"state_std", detail::standardizer_json(model.state_std)},
      {"param_std", detail::standardizer_json(model.param_std)},
      {"feature_std", detail::standardizer_json(model.feature_std)},
      {"epoch", st.epoch},
      {"train_seed", ck.train_seed},
      {"adam",
       {{"step", st.adam.step},
        {"beta1", st.adam.beta1},
        {"beta2", st.adam.beta2},
        {"epsilon", st.adam.epsilon},
        {"learning_rate", st.adam.learning_rate}}},
      {"tensors", shapes},
      {"history", history},
      {"extra", ck.extra}};
  std::ofstream os = detail::open_out(path);
  detail::write_preamble(os, "DPCCKPT1", header);
  for (const Matrix* p : params) detail::write_doubles(os, p->data(), static_cast<std::size_t>(p->size()));
  for (const Matrix& m : st.adam.first_moment) detail::write_doubles(os, m.data(), static_cast<std::size_t>(m.size()));
  for (const Matrix& m : st.adam.second_moment) detail::write_doubles(os, m.data(), static_cast<std::size_t>(m.size()));
  if (!os) throw IoError("write failed for '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("checkpoint '" + path.string() + "' does not exist");
  std::ifstream is = detail::open_in(path);
  const std::string what = "checkpoint '" + path.string() + "'";
  const nlohmann::json h = detail::read_preamble(is, "DPCCKPT1", what);
  Checkpoint ck;
  try {
    ck.benchmark = h.at("benchmark");
    ck.train_seed = h.at("train_seed").get<std::uint64_t>();
    ck.extra = h.at("extra");
    const BenchmarkSpec spec = benchmark_from_json(ck.benchmark);
    const Regime regime = parse_regime(h.at("regime").get<std::string>());
    const std::vector<int> dims = h.at("dims").get<std::vector<int>>();
    if (dims.size() < 2) throw IoError(what + ": malformed network dimensions");
    DpcOptions opt;
    opt.hidden.assign(dims.begin() + 1, dims.end() - 1);
    opt.latent_dim = h.at("latent_dim").get<int>();
    opt.data_only = h.at("data_only").get<bool>();

    DpcModel& model = ck.state.model;
    model.benchmark = spec.name;
    model.regime = regime_name(regime);
    model.data_only = opt.data_only;
    const SdeModel& known = spec.known_model(regime);
    model.known = opt.data_only
                      ? zero_model(known.dim_state, known.dim_params, spec.name + "/data_only")
                      : known;
    model.qoi = spec.qoi;
    model.corrected_component = spec.corrected_component;
    model.latent_dim = opt.latent_dim;
    model.dt = h.at("dt").get<double>();
    model.train_steps = h.at("train_steps").get<std::size_t>();
    model.net = make_mlp(dims.front(), dims.back(), opt.hidden, 0);
    if (model.net.input_dim() != model.input_dim())
      throw IoError(what + ": network input width does not match benchmark '" + spec.name + "'");
    model.drift_scale = h.at("drift_scale").get<double>();
    model.diffusion_scale = h.at("diffusion_scale").get<double>();
    model.state_std = detail::standardizer_from_json(h.at("state_std"));
    model.param_std = detail::standardizer_from_json(h.at("param_std"));
    model.feature_std = detail::standardizer_from_json(h.at("feature_std"));

    ck.state.epoch = h.at("epoch").get<int>();
    const auto& a = h.at("adam");
    std::vector<Matrix*> params = model.trainable();
    ck.state.adam = AdamState(params, a.at("learning_rate").get<double>());
    ck.state.adam.step = a.at("step").get<long>();
    ck.state.adam.beta1 = a.at("beta1").get<double>();
    ck.state.adam.beta2 = a.at("beta2").get<double>();
    ck.state.adam.epsilon = a.at("epsilon").get<double>();

    const auto& shapes = h.at("tensors");
    if (shapes.size() != params.size()) throw IoError(what + ": tensor count does not match the model");
    for (std::size_t k = 0; k < params.size(); ++k)
      if (shapes[k][0].get<Eigen::Index>() != params[k]->rows() ||
          shapes[k][1].get<Eigen::Index>() != params[k]->cols())
        throw IoError(what + ": tensor " + std::to_string(k) + " has an unexpected shape");
    auto read_into = [&](Matrix& m) {
      detail::read_exact(is, m.data(), static_cast<std::size_t>(m.size()) * sizeof(double), what);
    };
    for (Matrix* p : params) read_into(*p);
    for (Matrix& m : ck.state.adam.first_moment) read_into(m);
    for (Matrix& m : ck.state.adam.second_moment) read_into(m);

    for (const auto& r : h.at("history")) {
      EpochRecord e;
      e.epoch = r[0].get<int>();
      e.lr = r[1].get<double>();
      e.loss = r[2].is_null() ? std::numeric_limits<double>::quiet_NaN() : r[2].get<double>();
      e.lambda = r[3].get<double>();
      e.beta_in = r[4].get<double>();
      e.beta_out = r[5].get<double>();
      e.wall_seconds = r[6].get<double>();
      e.skipped_batches = r[7].get<int>();
      ck.state.history.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(what + ": malformed header: " + e.what());
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError(what + ": trailing bytes");
  return ck;
}

}  // namespace dpc
