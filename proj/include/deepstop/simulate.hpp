#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "deepstop/model.hpp"
#include "deepstop/parallel.hpp"
#include "deepstop/rng.hpp"
#include "deepstop/time_grid.hpp"

namespace deepstop {

struct SeedSpec {
  std::uint64_t seed = 1;
  std::string stream = "train";
};

/// Simulated forward paths with matched Brownian increments. Storage is
/// step-major so that the slice "all paths at step k" is contiguous.
/// Stored increments are the model's driving increments (see diffusion_at);
/// when fine data is present each coarse increment is the exact sum of its
/// substep increments.
struct PathEnsemble {
  int dim = 0;
  int steps = 0;
  int substeps = 1;
  bool has_fine = false;
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::string stream;

  std::vector<double> states;           // (N+1) * M * d
  std::vector<double> increments;       // N * M * d
  std::vector<double> fine_states;      // N * J * M * d
  std::vector<double> fine_increments;  // N * J * M * d

  std::span<const double> state(int k, std::size_t i) const {
    return {states.data() + (static_cast<std::size_t>(k) * count + i) * dim, static_cast<std::size_t>(dim)};
  }
  std::span<const double> increment(int k, std::size_t i) const {
    return {increments.data() + (static_cast<std::size_t>(k) * count + i) * dim,
            static_cast<std::size_t>(dim)};
  }
  std::span<const double> fine_state(int k, int j, std::size_t i) const {
    return {fine_states.data() + ((static_cast<std::size_t>(k) * substeps + j) * count + i) * dim,
            static_cast<std::size_t>(dim)};
  }
  std::span<const double> fine_increment(int k, int j, std::size_t i) const {
    return {fine_increments.data() + ((static_cast<std::size_t>(k) * substeps + j) * count + i) * dim,
            static_cast<std::size_t>(dim)};
  }

  // Contiguous block of all paths' states at step k (count * dim doubles).
  std::span<const double> states_at(int k) const {
    return {states.data() + static_cast<std::size_t>(k) * count * dim, count * static_cast<std::size_t>(dim)};
  }
};

namespace detail {

// One Euler path; writes states/increments for path slot `i`.
inline void simulate_path(const ModelSpec& model, const TimeGrid& grid, const NormalField& rng,
                          std::uint64_t global_path, std::size_t i, bool fine, PathEnsemble& out) {
  const int d = model.dim;
  const int n = grid.steps;
  const int j_max = fine ? grid.substeps : 1;
  const double dt = fine ? grid.fine_dt() : grid.dt();
  const double sqdt = std::sqrt(dt);
  const bool correlated = model.has_correlation();

  std::vector<double> x(model.x0);
  std::vector<double> z(d), dw(d), mu(d), diff_dw(d);
  Matrix sigma;

  auto store = [&](std::vector<double>& dst, std::size_t slot) {
    std::memcpy(dst.data() + slot * d, x.data(), sizeof(double) * d);
  };

  store(out.states, static_cast<std::size_t>(0) * out.count + i);
  for (int k = 0; k < n; ++k) {
    double* coarse_dw = out.increments.data() + (static_cast<std::size_t>(k) * out.count + i) * d;
    for (int c = 0; c < d; ++c) coarse_dw[c] = 0.0;
    for (int j = 0; j < j_max; ++j) {
      for (int c = 0; c < d; ++c) z[c] = rng.normal(global_path, static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(c));
      if (correlated) {
        for (int r = 0; r < d; ++r) {
          double s = 0.0;
          for (int c = 0; c <= r; ++c) s += model.chol(r, c) * z[c];
          dw[r] = sqdt * s;
        }
      } else {
        for (int c = 0; c < d; ++c) dw[c] = sqdt * z[c];
      }
      if (fine) {
        store(out.fine_states, (static_cast<std::size_t>(k) * j_max + j) * out.count + i);
        double* fdw = out.fine_increments.data() +
                      ((static_cast<std::size_t>(k) * j_max + j) * out.count + i) * d;
        std::memcpy(fdw, dw.data(), sizeof(double) * d);
      }
      for (int c = 0; c < d; ++c) coarse_dw[c] += dw[c];
      drift_at(model, x, mu);
      diffusion_at(model, x, sigma);
      matvec(sigma, dw, diff_dw);
      for (int c = 0; c < d; ++c) x[c] += mu[c] * dt + diff_dw[c];
    }
    store(out.states, (static_cast<std::size_t>(k) + 1) * out.count + i);
  }
}

}  // namespace detail

/// Euler-Maruyama simulation of `count` paths. `path_offset` shifts the
/// counter-based randomness so disjoint blocks of one logical ensemble can be
/// produced independently.
inline PathEnsemble simulate(const ModelSpec& model, const TimeGrid& grid, std::size_t count,
                             const SeedSpec& seed, bool fine = false, std::size_t path_offset = 0,
                             int threads = 1) {
  if (count < 1) throw Error(ErrorCode::ValidationError, "simulate needs at least one path");
  PathEnsemble out;
  out.dim = model.dim;
  out.steps = grid.steps;
  out.substeps = fine ? grid.substeps : 1;
  out.has_fine = fine;
  out.count = count;
  out.seed = seed.seed;
  out.stream = seed.stream;
  out.stream_id = NormalField::stream_id(seed.stream);

  const std::size_t md = count * static_cast<std::size_t>(model.dim);
  out.states.resize(md * (grid.steps + 1));
  out.increments.resize(md * grid.steps);
  if (fine) {
    out.fine_states.resize(md * grid.steps * static_cast<std::size_t>(grid.substeps));
    out.fine_increments.resize(md * grid.steps * static_cast<std::size_t>(grid.substeps));
  }

  const NormalField rng(seed.seed, seed.stream);
  parallel_chunks(count, threads, kDefaultChunk, [&](std::size_t, std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
      detail::simulate_path(model, grid, rng, path_offset + i, i, fine, out);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Binary dump: magic "BSDEPATH", u32 version, then u64 M, u32 N, u32 d, u32 J,
// u8 has_fine, u64 seed, u64 stream id, followed by the row-major f64 arrays
// (states, increments, and the fine pair when present). Little-endian.
// ---------------------------------------------------------------------------

inline void dump_paths(const PathEnsemble& e, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  const char magic[8] = {'B', 'S', 'D', 'E', 'P', 'A', 'T', 'H'};
  f.write(magic, 8);
  auto put32 = [&](std::uint32_t v) { f.write(reinterpret_cast<const char*>(&v), 4); };
  auto put64 = [&](std::uint64_t v) { f.write(reinterpret_cast<const char*>(&v), 8); };
  put32(1u);
  put64(e.count);
  put32(static_cast<std::uint32_t>(e.steps));
  put32(static_cast<std::uint32_t>(e.dim));
  put32(static_cast<std::uint32_t>(e.substeps));
  const std::uint8_t hf = e.has_fine ? 1 : 0;
  f.write(reinterpret_cast<const char*>(&hf), 1);
  put64(e.seed);
  put64(e.stream_id);
  auto put_array = [&](const std::vector<double>& v) {
    f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
  };
  put_array(e.states);
  put_array(e.increments);
  if (e.has_fine) {
    put_array(e.fine_states);
    put_array(e.fine_increments);
  }
  if (!f) throw Error(ErrorCode::IoError, "short write to " + path);
}

inline PathEnsemble load_paths(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "BSDEPATH", 8) != 0)
    throw Error(ErrorCode::ParseError, path + " is not a path dump");
  auto get32 = [&]() { std::uint32_t v; f.read(reinterpret_cast<char*>(&v), 4); return v; };
  auto get64 = [&]() { std::uint64_t v; f.read(reinterpret_cast<char*>(&v), 8); return v; };
  const std::uint32_t version = get32();
  if (version != 1u) throw Error(ErrorCode::ParseError, "unsupported path dump version");
  PathEnsemble e;
  e.count = get64();
  e.steps = static_cast<int>(get32());
  e.dim = static_cast<int>(get32());
  e.substeps = static_cast<int>(get32());
  std::uint8_t hf = 0;
  f.read(reinterpret_cast<char*>(&hf), 1);
  e.has_fine = hf != 0;
  e.seed = get64();
  e.stream_id = get64();
  const std::size_t md = e.count * static_cast<std::size_t>(e.dim);
  auto get_array = [&](std::vector<double>& v, std::size_t n) {
    v.resize(n);
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8));
  };
  get_array(e.states, md * (e.steps + 1));
  get_array(e.increments, md * e.steps);
  if (e.has_fine) {
    get_array(e.fine_states, md * e.steps * static_cast<std::size_t>(e.substeps));
    get_array(e.fine_increments, md * e.steps * static_cast<std::size_t>(e.substeps));
  }
  if (!f) throw Error(ErrorCode::ParseError, path + " is truncated");
  return e;
}

}  // namespace deepstop
