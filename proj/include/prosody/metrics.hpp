#ifndef PROSODY_METRICS_HPP_
#define PROSODY_METRICS_HPP_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "prosody/mel.hpp"
#include "prosody/pitch.hpp"

namespace prosody::metrics {

// Monotone warping path between two frame sequences. Starts at (0,0), ends
// at (Ta-1, Tb-1), steps in {(1,0), (0,1), (1,1)}.
struct AlignmentPath {
  std::vector<std::pair<int, int>> steps;
  double cost = 0.0;
};

// Full unconstrained DTW under Euclidean frame distance. Ties prefer the
// diagonal, then advancing in a, then in b.
AlignmentPath dtw_align(const MelSpectrogram& a, const MelSpectrogram& b);

// Tracks pulled through an alignment path; both sides share length T.
struct AlignedTrackPair {
  std::vector<double> f_a, f_b;
  std::vector<std::uint8_t> v_a, v_b;
  std::vector<double> e_a, e_b;

  int size() const { return static_cast<int>(f_a.size()); }
};

AlignedTrackPair apply_alignment(const AlignmentPath& path,
                                 const FrameTrack& track_a,
                                 const FrameTrack& track_b);

// Relative F0 deviation beyond which a co-voiced frame counts as a gross
// pitch error.
inline constexpr double kDefaultGpeThreshold = 0.2;

// All five objective scores of one utterance pair. gpe/f_mae are null when
// the pair has no co-voiced frame.
struct MetricReport {
  std::optional<double> gpe;
  double vde = 0.0;
  double ffe = 0.0;
  std::optional<double> f_mae;
  double e_mae = 0.0;
  long co_voiced_frames = 0;
  long total_frames = 0;

  nlohmann::json to_json() const;
};

std::optional<double> gpe(const AlignedTrackPair& pair,
                          double threshold = kDefaultGpeThreshold);
double vde(const AlignedTrackPair& pair);
double ffe(const AlignedTrackPair& pair,
           double threshold = kDefaultGpeThreshold);
std::optional<double> f_mae(const AlignedTrackPair& pair);
double e_mae(const AlignedTrackPair& pair);

MetricReport evaluate_pair(const AlignedTrackPair& pair,
                           double gpe_threshold = kDefaultGpeThreshold);

// Corpus-level aggregation: undefined metrics are excluded from means and
// counted instead of poisoning the averages.
struct CorpusSummary {
  double mean_gpe = 0.0, mean_vde = 0.0, mean_ffe = 0.0;
  double mean_f_mae = 0.0, mean_e_mae = 0.0;
  long pairs = 0;
  long undefined_gpe = 0;
  long undefined_f_mae = 0;
  long failed = 0;

  nlohmann::json to_json() const;
};

CorpusSummary summarize(const std::vector<MetricReport>& reports, long failed);

// One CSV row per pair, columns in Table order:
// id,gpe,vde,ffe,f_mae,e_mae,flags
std::string report_csv_header();
std::string report_csv_row(const std::string& id, const MetricReport& report);

}  // namespace prosody::metrics

#endif  // PROSODY_METRICS_HPP_
