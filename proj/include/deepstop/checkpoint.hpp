#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "deepstop/errors.hpp"
#include "deepstop/step_network.hpp"
#include "deepstop/time_grid.hpp"
#include "deepstop/version.hpp"

namespace deepstop {

struct CheckpointMeta {
  int format = 1;
  std::string tool_version = kVersion;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  TimeGrid grid;
  int state_dim = 0;
  std::vector<int> hidden;
  std::string model_kind;
  std::string payoff_kind;
};

/// Trained subnetworks for interior time steps k = 1..N-1 plus provenance.
struct Checkpoint {
  CheckpointMeta meta;
  std::map<int, StepNetwork> nets;

  const StepNetwork& at(int k) const {
    auto it = nets.find(k);
    if (it == nets.end())
      throw Error(ErrorCode::CheckpointGridMismatch, "no trained network for step " + std::to_string(k));
    return it->second;
  }
};

namespace detail {

struct TensorEntry {
  std::string name;
  std::uint64_t offset;
  std::uint64_t count;
};

template <typename Fn>
void visit_net_tensors(Mlp& net, const std::string& prefix, Fn&& fn) {
  for (std::size_t l = 0; l < net.dense.size(); ++l) {
    fn(prefix + ".dense" + std::to_string(l) + ".w", net.dense[l].w);
    fn(prefix + ".dense" + std::to_string(l) + ".b", net.dense[l].b);
  }
  for (std::size_t l = 0; l < net.norms.size(); ++l) {
    const std::string p = prefix + ".bn" + std::to_string(l);
    fn(p + ".gamma", net.norms[l].gamma);
    fn(p + ".beta", net.norms[l].beta);
    fn(p + ".run_mean", net.norms[l].run_mean);
    fn(p + ".run_var", net.norms[l].run_var);
  }
}

template <typename Fn>
void visit_step_tensors(StepNetwork& net, int k, Fn&& fn) {
  visit_net_tensors(net.value, "k" + std::to_string(k) + ".value", fn);
  visit_net_tensors(net.gradient, "k" + std::to_string(k) + ".gradient", fn);
}

}  // namespace detail

// Layout: magic "DPSCKPT1", u64 manifest length, JSON manifest, then the
// little-endian f64 tensor blobs in manifest order.
inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  nlohmann::json manifest;
  manifest["format"] = ckpt.meta.format;
  manifest["tool_version"] = ckpt.meta.tool_version;
  manifest["config_hash"] = ckpt.meta.config_hash;
  manifest["seed"] = ckpt.meta.seed;
  manifest["grid"] = {{"horizon", ckpt.meta.grid.horizon},
                      {"steps", ckpt.meta.grid.steps},
                      {"substeps", ckpt.meta.grid.substeps}};
  manifest["state_dim"] = ckpt.meta.state_dim;
  manifest["hidden"] = ckpt.meta.hidden;
  manifest["model_kind"] = ckpt.meta.model_kind;
  manifest["payoff_kind"] = ckpt.meta.payoff_kind;

  std::vector<detail::TensorEntry> entries;
  std::uint64_t offset = 0;
  auto& nets = const_cast<std::map<int, StepNetwork>&>(ckpt.nets);
  for (auto& [k, net] : nets) {
    detail::visit_step_tensors(net, k, [&](const std::string& name, std::vector<double>& t) {
      entries.push_back({name, offset, t.size()});
      offset += t.size();
    });
  }
  nlohmann::json jt = nlohmann::json::array();
  for (const auto& e : entries) jt.push_back({{"name", e.name}, {"offset", e.offset}, {"count", e.count}});
  manifest["tensors"] = jt;
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& [k, net] : ckpt.nets) {
    (void)net;
    steps.push_back(k);
  }
  manifest["steps"] = steps;

  const std::string text = manifest.dump();
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  const char magic[8] = {'D', 'P', 'S', 'C', 'K', 'P', 'T', '1'};
  f.write(magic, 8);
  const std::uint64_t len = text.size();
  f.write(reinterpret_cast<const char*>(&len), 8);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (auto& [k, net] : nets) {
    detail::visit_step_tensors(net, k, [&](const std::string&, std::vector<double>& t) {
      f.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * 8));
    });
  }
  if (!f) throw Error(ErrorCode::IoError, "short write to " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::string(magic, 8) != "DPSCKPT1")
    throw Error(ErrorCode::ParseError, path + " is not a checkpoint");
  std::uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), 8);
  std::string text(len, '\0');
  f.read(text.data(), static_cast<std::streamsize>(len));
  nlohmann::json manifest = nlohmann::json::parse(text, nullptr, false);
  if (manifest.is_discarded()) throw Error(ErrorCode::ParseError, "bad checkpoint manifest");

  Checkpoint ckpt;
  ckpt.meta.format = manifest.at("format").get<int>();
  ckpt.meta.tool_version = manifest.at("tool_version").get<std::string>();
  ckpt.meta.config_hash = manifest.at("config_hash").get<std::uint64_t>();
  ckpt.meta.seed = manifest.at("seed").get<std::uint64_t>();
  ckpt.meta.grid.horizon = manifest.at("grid").at("horizon").get<double>();
  ckpt.meta.grid.steps = manifest.at("grid").at("steps").get<int>();
  ckpt.meta.grid.substeps = manifest.at("grid").at("substeps").get<int>();
  ckpt.meta.state_dim = manifest.at("state_dim").get<int>();
  ckpt.meta.hidden = manifest.at("hidden").get<std::vector<int>>();
  ckpt.meta.model_kind = manifest.at("model_kind").get<std::string>();
  ckpt.meta.payoff_kind = manifest.at("payoff_kind").get<std::string>();

  NetworkConfig cfg;
  cfg.state_dim = ckpt.meta.state_dim;
  cfg.hidden = ckpt.meta.hidden;
  for (int k : manifest.at("steps").get<std::vector<int>>()) ckpt.nets.emplace(k, StepNetwork(cfg));

  for (const auto& jt : manifest.at("tensors")) {
    const std::string name = jt.at("name").get<std::string>();
    const std::uint64_t count = jt.at("count").get<std::uint64_t>();
    // Tensors are stored in manifest order, so a sequential read matches.
    const int k = std::stoi(name.substr(1, name.find('.') - 1));
    auto& net = ckpt.nets.at(k);
    bool found = false;
    detail::visit_step_tensors(net, k, [&](const std::string& n, std::vector<double>& t) {
      if (n != name) return;
      if (t.size() != count) throw Error(ErrorCode::ParseError, "tensor size mismatch for " + n);
      f.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(count * 8));
      found = true;
    });
    if (!found) throw Error(ErrorCode::ParseError, "unexpected tensor " + name);
  }
  if (!f) throw Error(ErrorCode::ParseError, path + " is truncated");
  for (auto& [k, net] : ckpt.nets) {
    (void)k;
    for (auto& l : net.value.dense) l.sync_transpose();
    for (auto& l : net.gradient.dense) l.sync_transpose();
  }
  return ckpt;
}

}  // namespace deepstop
