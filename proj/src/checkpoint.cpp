#include "tiltrotor/checkpoint.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "tiltrotor/csv.hpp"
#include "tiltrotor/errors.hpp"

namespace tiltrotor {

namespace {

using nlohmann::json;

json dump_mlp(const Mlp& net) {
  return {{"layers", net.layer_sizes()},
          {"parameters", std::vector<double>(net.parameters().begin(), net.parameters().end())}};
}

void load_mlp(const json& j, Mlp& net, const std::string& name) {
  const auto layers = j.at("layers").get<std::vector<std::size_t>>();
  if (layers != net.layer_sizes()) throw CorruptModelError(name + ": layer sizes do not match this build");
  const auto values = j.at("parameters").get<std::vector<double>>();
  if (values.size() != net.parameter_count()) {
    throw CorruptModelError(name + ": expected " + std::to_string(net.parameter_count()) + " parameters, found " +
                            std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), net.parameters().begin());
}

template <std::size_t N>
std::array<double, N> fixed_array(const json& j, const std::string& name) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != N) throw CorruptModelError(name + ": expected " + std::to_string(N) + " entries");
  std::array<double, N> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const PolicyParams& p = checkpoint.params;
  if (!p.finite()) throw CorruptModelError("refusing to save non-finite parameters");
  const ObservationNormalizer& n = p.normalizer;
  json j;
  j["format"] = "tiltrotor-policy";
  j["version"] = kCheckpointVersion;
  j["metadata"] = checkpoint.metadata;
  j["policy"] = dump_mlp(p.policy);
  j["value"] = dump_mlp(p.value);
  j["normalizer"] = {{"mean", n.mean}, {"var", n.var}, {"count", n.count}, {"clip", n.clip}, {"enabled", n.enabled}};

  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  const std::string where = "checkpoint " + path.string();
  Checkpoint c;
  try {
    const json j = json::parse(in);
    if (j.value("format", "") != "tiltrotor-policy") throw CorruptModelError(where + ": not a policy checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CorruptModelError(where + ": unsupported version " + std::to_string(version));
    }
    c.metadata = j.value("metadata", std::map<std::string, std::string>{});
    load_mlp(j.at("policy"), c.params.policy, where + " policy");
    load_mlp(j.at("value"), c.params.value, where + " value");
    const json& n = j.at("normalizer");
    c.params.normalizer.mean = fixed_array<kObservationSize>(n.at("mean"), where + " normalizer mean");
    c.params.normalizer.var = fixed_array<kObservationSize>(n.at("var"), where + " normalizer var");
    c.params.normalizer.count = n.at("count").get<double>();
    c.params.normalizer.clip = n.at("clip").get<double>();
    c.params.normalizer.enabled = n.at("enabled").get<bool>();
  } catch (const json::exception& e) {
    throw CorruptModelError(where + ": " + e.what());
  }
  // JSON has no NaN; nlohmann writes non-finite numbers as null, which fails
  // the parse above, but reject anything odd in the normalizer here too.
  for (std::size_t i = 0; i < kObservationSize; ++i) {
    if (!std::isfinite(c.params.normalizer.mean[i]) || !(c.params.normalizer.var[i] >= 0.0)) {
      throw CorruptModelError(where + ": invalid normalizer statistics");
    }
  }
  if (!c.params.finite()) throw CorruptModelError(where + ": non-finite weights");
  return c;
}

void write_training_curve(const std::filesystem::path& path, std::span<const TrainingCurveRow> rows) {
  CsvWriter w(path, {"iteration", "k", "env_steps", "eval_reward", "policy_loss", "value_loss", "entropy",
                     "approx_kl", "clip_fraction"});
  for (const TrainingCurveRow& r : rows) {
    w.row({static_cast<double>(r.iteration), r.k, static_cast<double>(r.env_steps), r.eval_reward,
           r.losses.policy_loss, r.losses.value_loss, r.losses.entropy, r.losses.approx_kl, r.losses.clip_fraction});
  }
  w.close();
}

}  // namespace tiltrotor
