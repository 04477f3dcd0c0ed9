#pragma once

#include <map>
#include <string>

#include "hypermol/evalreport.hpp"
#include "hypermol/phantom.hpp"
#include "hypermol/reconstruct.hpp"

namespace hypermol {

/// Malformed, truncated or wrong-version files (CLI exit code 2).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration (CLI exit code 1).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Binary formats, little-endian on any host. Writes are whole-file atomic
// (temp file + rename).
//
// HVIMG1: "HVIMG1\0\0" | u32 count | u32 N | f64 pixel_size
//         | count * N * N f32, row major, image major
// HVCIR1: "HVCIR1\0\0" | u32 count | u32 K | f64 delta_omega | u32 p[K]
//         | per image: complex64 (f32 re, f32 im) in (k, m asc) order,
//           then f32 DC
// HVVOL1: "HVVOL1\0\0" | u32 K | u32 Q | u32 basis kind | f64 delta_omega
//         | u32 p[K] | complex64 data in tensor_flat_index order
//         | f32 DC per q
// ---------------------------------------------------------------------------

void write_hvimg(const std::string& path, const ImageStack& stack);
ImageStack read_hvimg(const std::string& path);

void write_hvcir(const std::string& path, const CircleStack& stack);
CircleStack read_hvcir(const std::string& path);

void write_hvvol(const std::string& path, const HyperVolumeCoeffs& hv);
HyperVolumeCoeffs read_hvvol(const std::string& path);

// ---------------------------------------------------------------------------
// CSV sidecars.
// ---------------------------------------------------------------------------

void write_labels_csv(const std::string& path,
                      const std::vector<TruthLabel>& labels);
std::vector<TruthLabel> read_labels_csv(const std::string& path);

void write_assignments_csv(const std::string& path,
                           const std::vector<Assignment>& assignments);
std::vector<Assignment> read_assignments_csv(const std::string& path);

void write_diagnostics_csv(const std::string& path,
                           const std::vector<StageDiag>& diags);

void write_mapping_csv(const std::string& path, const ParamMapping& mapping);
void write_histogram_csv(const std::string& path,
                         const std::vector<int>& histogram);
void write_shellcorr_csv(const std::string& path,
                         const std::vector<double>& t_samples,
                         const std::vector<std::vector<double>>& corr_per_t);

/// Raw f32 grid plus a small text sidecar describing it.
void write_raw_volume(const std::string& path, const SynthesisResult& grid,
                      double t, const std::string& source);

// ---------------------------------------------------------------------------
// Line-oriented "key = value" configuration with '#' comments. Blob tables
// use indexed keys (blob.0.sigma = ..., blob.0.c1 = "x y z").
// ---------------------------------------------------------------------------

struct RunConfig {
  std::string preset = "cat";  // phantom preset; empty when blobs are listed
  std::vector<GaussianBlob> blobs;

  int N = 33;
  double pixel_size = 0.0;  // 0 = 1/N
  int image_count = 1000;
  double snr = 0.0625;
  std::uint64_t seed = 1;

  int K = 12;
  double delta_omega = kPi;
  int L_max = 0;  // 0 = K+1
  ParamBasisSpec basis{ParamBasisKind::legendre, 3};

  // marching; empty stages = built by default_schedule
  MarchingSchedule schedule;
  int iters_per_stage = 40;
  double base_step = 2.0;

  int sphere_samples = 256;
  int t_samples = 64;
  int minibatch = 32;
  int final_sphere_samples = 1024;
  int gamma_grid = 128;
  bool stratified_t = true;
  bool reparam_uniform = false;
  int threads = 0;

  std::string out_dir = ".";

  void validate() const;
  ShellGrid make_grid() const;
  GaussianBlobPhantom make_phantom() const;
  ReconstructOptions make_reconstruct_options() const;
  double effective_pixel_size() const { return pixel_size > 0 ? pixel_size : 1.0 / N; }
};

RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);
std::string dump_config(const RunConfig& cfg);

/// write temp + rename, so readers never observe a partial file
void atomic_write_file(const std::string& path, const std::string& bytes);

}  // namespace hypermol
