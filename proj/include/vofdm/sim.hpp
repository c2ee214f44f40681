#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vofdm/decoders.hpp"
#include "vofdm/sifft.hpp"

namespace vofdm {

/// One Monte Carlo experiment: a mode, a parameter grid, a trial budget and a
/// master seed. Parsed from key=value config files and/or CLI flags.
struct ExperimentSpec {
    std::string mode;  // rmse-exact | rmse-approx | ber-sweep | diversity | decoder-compare | joint
    std::vector<int> Ls{256};
    std::vector<int> Ms{4};
    std::vector<int> Ps{16};
    std::vector<int> Ks{4};
    std::vector<int> Ds{16};
    std::vector<double> snr_dbs{10.0};
    std::vector<std::string> decoders{"pis"};

    long trials = 100;
    std::uint64_t seed = 1;
    std::string out;  // empty -> stdout

    RadiusPolicy radius_policy = RadiusPolicy::Formula;
    double fixed_radius = 0;
    ErasurePolicy erasure_policy = ErasurePolicy::ExpandRadius;
    bool genie_channel = true;
    bool force_zero_tap = false;
    int threads = 0;  // 0 -> hardware
    std::optional<std::string> channel_file;
    std::optional<std::string> pilot_file;
    SifftParams sifft;
};

/// One emitted metric: the grid point echo plus (name, value, trials, stderr).
struct MetricsRecord {
    std::string mode;
    int L = 0, M = 0, P = 0, K = 0, D = 0;
    double snr_db = 0;
    std::string decoder;
    std::string radius_policy;
    std::string metric;
    double value = 0;
    long trials = 0;
    double standard_error = 0;
};

class CsvWriter {
  public:
    /// Writes the provenance comments (# seed=..., # version=..., # spec-hash=...)
    /// and the header row.
    CsvWriter(std::ostream& os, const ExperimentSpec& spec);
    void row(const MetricsRecord& rec);

  private:
    std::ostream& os_;
};

std::string radius_policy_name(RadiusPolicy p);
RadiusPolicy parse_radius_policy(const std::string& s);
DecoderKind parse_decoder(const std::string& s);

/// FNV-1a of the canonical spec printout; part of the CSV provenance header.
std::uint64_t spec_hash(const ExperimentSpec& spec);
std::string canonical_spec(const ExperimentSpec& spec);

/// key = value lines, '#' comments, lists comma-separated.
void apply_config_line(ExperimentSpec& spec, const std::string& line);
ExperimentSpec load_config(std::istream& is);

/// Wilson-interval half-width at z = 1 for a proportion (errors out of total).
double wilson_half_width(long errors, long total);

/// Per-trial parallel map with deterministic reduction: results land in
/// trial-indexed slots and are reduced in trial order afterwards.
void parallel_trials(long trials, int threads, const std::function<void(long)>& body);

// Experiment runners append rows to the writer; infeasible grid points are
// skipped with a "# skipped:" comment on the stream. Each returns the number
// of grid points that actually ran.
int run_rmse_experiment(const ExperimentSpec& spec, std::ostream& os);
int run_ber_experiment(const ExperimentSpec& spec, std::ostream& os);
int run_joint_experiment(const ExperimentSpec& spec, std::ostream& os);
int run_diversity_experiment(const ExperimentSpec& spec, std::ostream& os);

/// Library version string used in CSV provenance.
const char* version_string();

}  // namespace vofdm
