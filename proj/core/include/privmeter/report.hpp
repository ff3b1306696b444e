#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "privmeter/error.hpp"
#include "privmeter/footprint.hpp"
#include "privmeter/metrics.hpp"
#include "privmeter/overlap.hpp"
#include "privmeter/stats.hpp"
#include "privmeter/synth.hpp"

namespace privmeter::report {

std::string_view toolkit_version();

struct SyntheticIndex {
  std::string config_id;
  double protection_index = 1.0;
  double quality_index = 1.0;

  bool operator==(const SyntheticIndex&) const = default;
};

/// For every config: the mean over `protection` (resp. `quality`) metrics
/// of config total / bare total, totals being run totals averaged over
/// runs. Throws privmeter::Error naming the metric when a bare total is 0.
std::vector<SyntheticIndex> synthetic_indices(const MetricTable& table, std::string_view bare_id,
                                              std::span<const Metric> protection = kProtectionMetrics,
                                              std::span<const Metric> quality = kQualityMetrics);

/// Mean over runs of the run totals of `metric` for `config_id`.
double mean_total(const MetricTable& table, std::string_view config_id, Metric metric);

/// Everything a report bundle depends on.
struct ExperimentManifest {
  std::string bare_log;                        // crawl log with the unprotected runs
  std::optional<synth::EcosystemConfig> synth;  // generate the bare corpus instead
  int runs = 10;                               // runs to synthesise
  std::string blockers;                        // roster path
  std::string bare_id = "bare";
  double alpha = 0.05;
  std::vector<Metric> metrics{Metric::FpRequests, Metric::TpRequests, Metric::TpDomains, Metric::Cookies};
  std::optional<std::uint64_t> seed;  // overrides synth.seed
  std::string psl;                    // empty: bundled snapshot
  std::string adns;                   // empty with synth: generated entity map
  std::string cdn;
  std::string base_dir;               // relative paths resolve against this
};

/// JSON manifest. Throws privmeter::Error naming the missing field, e.g.
/// "blockers".
ExperimentManifest parse_manifest(std::string_view json_text, const std::string& base_dir);
ExperimentManifest load_manifest(const std::string& path);

/// Canonical JSON form (stable key order, resolved paths not included).
std::string canonical_manifest(const ExperimentManifest& manifest);

/// SHA-256 over the canonical manifest, the toolkit version and the bytes
/// of every file the manifest names.
std::string manifest_hash(const ExperimentManifest& manifest);

std::string sha256_hex(std::string_view data);

struct ReportBundle {
  std::string directory;
  std::vector<std::string> report_files;  // CSV reports, in stage order
  std::string hash;
};

/// Raised when a pipeline stage fails; `stage()` names it.
class PipelineError : public Error {
 public:
  PipelineError(std::string stage, const std::string& cause)
      : Error("stage " + stage + ": " + cause), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// ingest or synth -> simulate -> metrics -> rank -> footprint -> overlap ->
/// indices. Writes metrics.csv, ranks.csv, pvalues.csv, footprint.csv,
/// overlap.csv and indices.csv plus summary.txt and manifest.json into
/// `out_dir`. Work happens in a sibling temporary directory that is removed
/// on failure. An existing `out_dir` is replaced only if it is a previous
/// bundle (holds manifest.json).
ReportBundle run_pipeline(const ExperimentManifest& manifest, const std::string& out_dir, unsigned jobs = 1);

// Report writers. Every file starts with `comments` as `#` lines.

void write_rank_csv(std::ostream& out, const std::vector<std::pair<Metric, stats::RankAssignment>>& ranks,
                    const std::vector<std::string>& comments);
void write_pvalue_matrix(std::ostream& out, const stats::PairwiseKs& pairwise, const std::vector<std::string>& comments);
void write_indices_csv(std::ostream& out, const std::vector<SyntheticIndex>& indices,
                       const std::vector<std::string>& comments);
void write_overlap_csv(std::ostream& out, const std::vector<std::pair<BlockedKind, std::vector<OverlapCell>>>& tables,
                       const std::vector<std::string>& comments);

struct FootprintRow {
  std::string config_id;
  GroupingMethod method = GroupingMethod::Adns;
  std::string run;  // run index, or "all" for the union over runs
  FootprintMetrics metrics;
  double fallback_rate = 0.0;
};

void write_footprint_csv(std::ostream& out, const std::vector<FootprintRow>& rows,
                         const std::vector<std::string>& comments);

}  // namespace privmeter::report
