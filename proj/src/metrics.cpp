#include "prosody/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "prosody/error.hpp"

namespace prosody::metrics {

using nlohmann::json;

AlignmentPath dtw_align(const MelSpectrogram& a, const MelSpectrogram& b) {
  if (a.n_frames == 0 || b.n_frames == 0) {
    throw DataError("dtw_align needs non-empty sequences");
  }
  if (a.n_mels != b.n_mels) {
    throw DataError("dtw_align: mel dimensionality mismatch");
  }
  const int Ta = a.n_frames, Tb = b.n_frames, M = a.n_mels;

  auto dist = [&](int i, int j) {
    double acc = 0.0;
    for (int m = 0; m < M; ++m) {
      const double d = a.at(i, m) - b.at(j, m);
      acc += d * d;
    }
    return std::sqrt(acc);
  };

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(static_cast<std::size_t>(Ta) * Tb, inf);
  // predecessor direction: 0 diagonal, 1 from (i-1,j), 2 from (i,j-1)
  std::vector<std::uint8_t> from(static_cast<std::size_t>(Ta) * Tb, 0);
  auto at = [Tb](int i, int j) {
    return static_cast<std::size_t>(i) * Tb + j;
  };

  for (int i = 0; i < Ta; ++i) {
    for (int j = 0; j < Tb; ++j) {
      const double d = dist(i, j);
      if (i == 0 && j == 0) {
        cost[at(0, 0)] = d;
        continue;
      }
      double best = inf;
      std::uint8_t dir = 0;
      if (i > 0 && j > 0 && cost[at(i - 1, j - 1)] < best) {
        best = cost[at(i - 1, j - 1)];
        dir = 0;
      }
      if (i > 0 && cost[at(i - 1, j)] < best) {
        best = cost[at(i - 1, j)];
        dir = 1;
      }
      if (j > 0 && cost[at(i, j - 1)] < best) {
        best = cost[at(i, j - 1)];
        dir = 2;
      }
      cost[at(i, j)] = best + d;
      from[at(i, j)] = dir;
    }
  }

  AlignmentPath path;
  path.cost = cost[at(Ta - 1, Tb - 1)];
  int i = Ta - 1, j = Tb - 1;
  path.steps.emplace_back(i, j);
  while (i != 0 || j != 0) {
    const std::uint8_t dir = from[at(i, j)];
    if (i > 0 && j > 0 && dir == 0) {
      --i;
      --j;
    } else if (i > 0 && dir == 1) {
      --i;
    } else {
      --j;
    }
    path.steps.emplace_back(i, j);
  }
  std::reverse(path.steps.begin(), path.steps.end());
  return path;
}

AlignedTrackPair apply_alignment(const AlignmentPath& path,
                                 const FrameTrack& track_a,
                                 const FrameTrack& track_b) {
  AlignedTrackPair out;
  out.f_a.reserve(path.steps.size());
  for (const auto& [i, j] : path.steps) {
    if (i < 0 || i >= track_a.size() || j < 0 || j >= track_b.size()) {
      throw DataError("alignment path index outside track length");
    }
    out.f_a.push_back(track_a.f0[i]);
    out.v_a.push_back(track_a.voiced[i]);
    out.e_a.push_back(track_a.energy.empty() ? 0.0 : track_a.energy[i]);
    out.f_b.push_back(track_b.f0[j]);
    out.v_b.push_back(track_b.voiced[j]);
    out.e_b.push_back(track_b.energy.empty() ? 0.0 : track_b.energy[j]);
  }
  return out;
}

namespace {

long co_voiced(const AlignedTrackPair& pair) {
  long n = 0;
  for (int t = 0; t < pair.size(); ++t) {
    if (pair.v_a[t] && pair.v_b[t]) ++n;
  }
  return n;
}

long gross_errors(const AlignedTrackPair& pair, double threshold) {
  long n = 0;
  for (int t = 0; t < pair.size(); ++t) {
    if (pair.v_a[t] && pair.v_b[t] &&
        std::abs(pair.f_a[t] - pair.f_b[t]) > threshold * pair.f_a[t]) {
      ++n;
    }
  }
  return n;
}

}  // namespace

std::optional<double> gpe(const AlignedTrackPair& pair, double threshold) {
  const long denom = co_voiced(pair);
  if (denom == 0) return std::nullopt;
  return static_cast<double>(gross_errors(pair, threshold)) /
         static_cast<double>(denom);
}

double vde(const AlignedTrackPair& pair) {
  if (pair.size() == 0) throw DataError("vde on empty pair");
  long errors = 0;
  for (int t = 0; t < pair.size(); ++t) {
    if ((pair.v_a[t] != 0) != (pair.v_b[t] != 0)) ++errors;
  }
  return static_cast<double>(errors) / pair.size();
}

double ffe(const AlignedTrackPair& pair, double threshold) {
  if (pair.size() == 0) throw DataError("ffe on empty pair");
  long errors = 0;
  for (int t = 0; t < pair.size(); ++t) {
    if ((pair.v_a[t] != 0) != (pair.v_b[t] != 0)) ++errors;
  }
  errors += gross_errors(pair, threshold);
  return static_cast<double>(errors) / pair.size();
}

std::optional<double> f_mae(const AlignedTrackPair& pair) {
  double num = 0.0;
  long denom = 0;
  for (int t = 0; t < pair.size(); ++t) {
    if (pair.v_a[t] && pair.v_b[t]) {
      num += std::abs(pair.f_a[t] - pair.f_b[t]);
      ++denom;
    }
  }
  if (denom == 0) return std::nullopt;
  return num / static_cast<double>(denom);
}

double e_mae(const AlignedTrackPair& pair) {
  if (pair.size() == 0) throw DataError("e_mae on empty pair");
  double num = 0.0;
  for (int t = 0; t < pair.size(); ++t) {
    num += std::abs(pair.e_a[t] - pair.e_b[t]);
  }
  return num / pair.size();
}

MetricReport evaluate_pair(const AlignedTrackPair& pair, double gpe_threshold) {
  MetricReport report;
  report.gpe = gpe(pair, gpe_threshold);
  report.vde = vde(pair);
  report.ffe = ffe(pair, gpe_threshold);
  report.f_mae = f_mae(pair);
  report.e_mae = e_mae(pair);
  report.co_voiced_frames = co_voiced(pair);
  report.total_frames = pair.size();
  return report;
}

json MetricReport::to_json() const {
  json j;
  j["gpe"] = gpe.has_value() ? json(*gpe) : json(nullptr);
  j["vde"] = vde;
  j["ffe"] = ffe;
  j["f_mae"] = f_mae.has_value() ? json(*f_mae) : json(nullptr);
  j["e_mae"] = e_mae;
  j["co_voiced_frames"] = co_voiced_frames;
  j["total_frames"] = total_frames;
  return j;
}

CorpusSummary summarize(const std::vector<MetricReport>& reports, long failed) {
  CorpusSummary s;
  s.failed = failed;
  s.pairs = static_cast<long>(reports.size());
  long gpe_n = 0, fmae_n = 0;
  for (const auto& r : reports) {
    if (r.gpe) {
      s.mean_gpe += *r.gpe;
      ++gpe_n;
    } else {
      ++s.undefined_gpe;
    }
    if (r.f_mae) {
      s.mean_f_mae += *r.f_mae;
      ++fmae_n;
    } else {
      ++s.undefined_f_mae;
    }
    s.mean_vde += r.vde;
    s.mean_ffe += r.ffe;
    s.mean_e_mae += r.e_mae;
  }
  if (gpe_n > 0) s.mean_gpe /= gpe_n;
  if (fmae_n > 0) s.mean_f_mae /= fmae_n;
  if (s.pairs > 0) {
    s.mean_vde /= s.pairs;
    s.mean_ffe /= s.pairs;
    s.mean_e_mae /= s.pairs;
  }
  return s;
}

json CorpusSummary::to_json() const {
  return {{"mean_gpe", mean_gpe},       {"mean_vde", mean_vde},
          {"mean_ffe", mean_ffe},       {"mean_f_mae", mean_f_mae},
          {"mean_e_mae", mean_e_mae},   {"pairs", pairs},
          {"undefined_gpe", undefined_gpe},
          {"undefined_f_mae", undefined_f_mae},
          {"failed", failed}};
}

std::string report_csv_header() {
  return "id,gpe,vde,ffe,f_mae,e_mae,flags";
}

std::string report_csv_row(const std::string& id, const MetricReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << id << ",";
  if (r.gpe) os << *r.gpe;
  os << "," << r.vde << "," << r.ffe << ",";
  if (r.f_mae) os << *r.f_mae;
  os << "," << r.e_mae << ",";
  if (!r.gpe || !r.f_mae) os << "no_covoiced";
  return os.str();
}

}  // namespace prosody::metrics
