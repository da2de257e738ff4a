#include "levelblend/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "levelblend/latent.hpp"
#include "levelblend/plot.hpp"

namespace levelblend::analysis {

namespace {

// Runs fn(0..count-1) on up to `jobs` threads. Each index owns its output
// slot, so results do not depend on scheduling.
template <typename Fn>
void parallel_for(int count, int jobs, Fn&& fn) {
  jobs = std::clamp(jobs, 1, std::max(1, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (int j = 0; j < jobs; ++j) {
    workers.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

std::string default_label(models::ModelKind kind, std::string label) {
  if (!label.empty()) return label;
  std::string out;
  for (char c : models::kind_name(kind)) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::array<double, 4> corner_values(const metrics::SegmentMetrics& m) {
  return {m.density_pct, m.difficulty_pct, m.nonlinearity_pct, m.smb_proportion_pct.value_or(0.0)};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  out.close();
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

void prepare_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::IoError, "cannot create output directory " + dir.string());
  }
}

void save_png(const Image& image, const std::filesystem::path& path, std::vector<std::filesystem::path>& written) {
  write_png(image, path);
  written.push_back(path);
}

std::string upper(std::string_view s) {
  std::string out;
  for (char c : s) out += c == '_' ? ' ' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

BlendFractions blend_fractions(const std::vector<metrics::SegmentMetrics>& samples) {
  std::array<int, 4> counts{};
  for (const auto& m : samples) ++counts[static_cast<std::size_t>(m.blend_class)];
  BlendFractions f;
  if (samples.empty()) return f;
  const double n = static_cast<double>(samples.size());
  f.smb_only = counts[static_cast<std::size_t>(metrics::BlendClass::SmbOnly)] / n;
  f.ki_only = counts[static_cast<std::size_t>(metrics::BlendClass::KiOnly)] / n;
  f.blended = counts[static_cast<std::size_t>(metrics::BlendClass::Blended)] / n;
  f.empty = counts[static_cast<std::size_t>(metrics::BlendClass::Empty)] / n;
  return f;
}

ExpressiveRangeReport expressive_range(const models::Model& model, int n, std::uint64_t seed, std::string label,
                                       int jobs) {
  const auto zs = latent::sample_latents(n, seed);
  ExpressiveRangeReport report;
  report.kind = model.kind();
  report.label = default_label(model.kind(), std::move(label));
  report.n = n;
  report.seed = seed;
  report.samples.resize(static_cast<std::size_t>(n));
  parallel_for(n, jobs, [&](int i) {
    report.samples[static_cast<std::size_t>(i)] = metrics::compute(latent::decode(model, zs[static_cast<std::size_t>(i)]));
  });
  report.fractions = blend_fractions(report.samples);
  return report;
}

std::string_view source_name(PointSource s) noexcept {
  switch (s) {
    case PointSource::Generated: return "generated";
    case PointSource::Smb: return "smb";
    case PointSource::Ki: return "ki";
  }
  return "generated";
}

int CornerData::count(PointSource s) const {
  int c = 0;
  for (const auto& p : points) c += p.source == s;
  return c;
}

CornerData corner_data(const models::Model& model, int n, std::uint64_t seed, const TrainingCorpus& corpus,
                       std::string label, int jobs) {
  const auto range = expressive_range(model, n, seed, std::move(label), jobs);
  CornerData data;
  data.kind = range.kind;
  data.label = range.label;
  data.n = n;
  data.seed = seed;
  for (const auto& m : range.samples) {
    if (!m.smb_proportion_pct) {
      ++data.excluded_generated;
      continue;
    }
    const auto v = corner_values(m);
    data.points.push_back({PointSource::Generated, v});
    for (std::size_t k = 0; k < v.size(); ++k) {
      const int bin = std::min(kHistogramBins - 1, static_cast<int>(v[k] / (100.0 / kHistogramBins)));
      ++data.histograms[k][static_cast<std::size_t>(std::max(0, bin))];
    }
  }
  auto add_training = [&](const std::vector<TileGrid>& grids, PointSource source) {
    for (const auto& g : grids) {
      const auto m = metrics::compute(g);
      if (!m.smb_proportion_pct) {
        ++data.excluded_training;
        continue;
      }
      data.points.push_back({source, corner_values(m)});
    }
  };
  add_training(corpus.smb, PointSource::Smb);
  add_training(corpus.ki, PointSource::Ki);
  if (data.excluded_generated + data.excluded_training > 0) {
    std::fprintf(stderr, "corner data: excluded %d generated and %d training segments with no foreground tiles\n",
                 data.excluded_generated, data.excluded_training);
  }
  return data;
}

std::uint64_t run_seed(std::uint64_t base_seed, evolve::Objective objective, double target, int run) {
  // splitmix64 over a packed key keeps seeds distinct and well spread.
  std::uint64_t x = base_seed;
  x ^= (static_cast<std::uint64_t>(objective) + 1) * 0x100000000ULL;
  x ^= static_cast<std::uint64_t>(std::llround(target * 100.0)) << 40;
  x ^= static_cast<std::uint64_t>(run);
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

AccuracyReport evolution_accuracy(const models::Model& model, const std::vector<evolve::Objective>& objectives,
                                  const std::vector<double>& targets, int runs, std::uint64_t base_seed, long budget,
                                  std::string label, int jobs) {
  if (runs < 1) throw Error(ErrorCode::InvalidSpec, "runs must be at least 1");
  AccuracyReport report;
  report.kind = model.kind();
  report.label = default_label(model.kind(), std::move(label));
  report.runs = runs;
  report.budget = budget;
  report.base_seed = base_seed;

  std::vector<evolve::EvolutionSpec> specs;
  for (auto objective : objectives) {
    for (double target : targets) {
      for (int r = 0; r < runs; ++r) {
        evolve::EvolutionSpec spec;
        spec.objective = objective;
        spec.target_pct = target;
        spec.budget = budget;
        spec.seed = run_seed(base_seed, objective, target, r);
        spec.validate();
        specs.push_back(spec);
        EvolvedRun row;
        row.objective = objective;
        row.target = target;
        row.run = r;
        row.seed = spec.seed;
        report.evolved.push_back(row);
      }
    }
  }

  parallel_for(static_cast<int>(specs.size()), jobs, [&](int i) {
    const auto result = evolve::evolve_segment(model, specs[static_cast<std::size_t>(i)]);
    auto& row = report.evolved[static_cast<std::size_t>(i)];
    row.achieved = result.achieved;
    row.fitness = result.fitness;
    row.evaluations = result.search.evaluations;
    row.termination = result.search.termination;
    row.grid = result.grid;
  });

  for (std::size_t start = 0; start < report.evolved.size(); start += static_cast<std::size_t>(runs)) {
    AccuracyRow row;
    row.objective = report.evolved[start].objective;
    row.target = report.evolved[start].target;
    row.runs = runs;
    double sum = 0.0;
    for (int r = 0; r < runs; ++r) {
      if (const auto& a = report.evolved[start + static_cast<std::size_t>(r)].achieved) {
        sum += *a;
        ++row.defined;
      }
    }
    if (row.defined > 0) {
      row.mean = sum / row.defined;
      double sq = 0.0;
      for (int r = 0; r < runs; ++r) {
        if (const auto& a = report.evolved[start + static_cast<std::size_t>(r)].achieved) {
          sq += (*a - row.mean) * (*a - row.mean);
        }
      }
      row.stddev = std::sqrt(sq / row.defined);
    } else {
      row.mean = std::nan("");
      row.stddev = std::nan("");
    }
    report.rows.push_back(row);
  }
  return report;
}

std::string format_value(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_value(std::optional<double> v) { return v ? format_value(*v) : "NA"; }

std::string range_csv(const ExpressiveRangeReport& report) {
  std::string out = "density,difficulty,nonlinearity_mse,nonlinearity_pct,smb_proportion,blend_class\n";
  for (const auto& m : report.samples) {
    out += format_value(m.density_pct) + ',' + format_value(m.difficulty_pct) + ',' +
           format_value(m.nonlinearity_mse) + ',' + format_value(m.nonlinearity_pct) + ',' +
           format_value(m.smb_proportion_pct) + ',' + std::string(metrics::blend_class_name(m.blend_class)) + '\n';
  }
  return out;
}

std::string corner_csv(const CornerData& data) {
  std::string out = "source,density,difficulty,nonlinearity_pct,smb_proportion\n";
  for (const auto& p : data.points) {
    out += std::string(source_name(p.source));
    for (double v : p.values) out += ',' + format_value(v);
    out += '\n';
  }
  return out;
}

std::string accuracy_csv(const AccuracyReport& report) {
  std::string out = "objective,target,runs,defined,mean,std\n";
  for (const auto& r : report.rows) {
    out += std::string(evolve::objective_name(r.objective)) + ',' + format_value(r.target) + ',' +
           std::to_string(r.runs) + ',' + std::to_string(r.defined) + ',' + format_value(r.mean) + ',' +
           format_value(r.stddev) + '\n';
  }
  return out;
}

std::string evolved_csv(const AccuracyReport& report) {
  std::string out = "objective,target,run,seed,achieved,fitness,evaluations,termination,grid\n";
  for (const auto& r : report.evolved) {
    std::string grid;
    for (const auto& line : serialize_text(r.grid)) grid += (grid.empty() ? "" : "/") + line;
    out += std::string(evolve::objective_name(r.objective)) + ',' + format_value(r.target) + ',' +
           std::to_string(r.run) + ',' + std::to_string(r.seed) + ',' + format_value(r.achieved) + ',' +
           format_value(r.fitness) + ',' + std::to_string(r.evaluations) + ',' +
           std::string(cma::termination_name(r.termination)) + ',' + grid + '\n';
  }
  return out;
}

BlendFractions fractions_from_range_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  std::vector<metrics::SegmentMetrics> classes;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    metrics::SegmentMetrics m;
    m.blend_class = metrics::parse_blend_class(line.substr(line.rfind(',') + 1));
    classes.push_back(m);
  }
  return blend_fractions(classes);
}

std::vector<std::filesystem::path> emit_artifacts(const ExpressiveRangeReport& report,
                                                  const std::filesystem::path& out_dir) {
  prepare_dir(out_dir);
  std::vector<std::filesystem::path> written;
  const std::string stem = "range_" + report.label;
  write_text(out_dir / (stem + ".csv"), range_csv(report));
  written.push_back(out_dir / (stem + ".csv"));

  std::vector<int> proportion_hist(kHistogramBins, 0);
  const std::array<const char*, 3> xs{"density", "difficulty", "nonlinearity"};
  for (std::size_t k = 0; k < xs.size(); ++k) {
    plot::Series s{"generated", plot::kGenerated, {}, {}};
    for (const auto& m : report.samples) {
      if (!m.smb_proportion_pct) continue;
      const auto v = corner_values(m);
      s.x.push_back(v[k]);
      s.y.push_back(*m.smb_proportion_pct);
    }
    save_png(plot::scatter_plot({s}, upper(report.label) + " " + upper(xs[k]), upper(xs[k]) + " %", "SMB %"),
             out_dir / (stem + "_" + xs[k] + ".png"), written);
  }
  for (const auto& m : report.samples) {
    if (!m.smb_proportion_pct) continue;
    const int bin = std::min(kHistogramBins - 1, static_cast<int>(*m.smb_proportion_pct / (100.0 / kHistogramBins)));
    ++proportion_hist[static_cast<std::size_t>(bin)];
  }
  save_png(plot::histogram_plot(proportion_hist, upper(report.label) + " SMB PROPORTION", "SMB %"),
           out_dir / (stem + "_proportion_hist.png"), written);

  const auto& f = report.fractions;
  nlohmann::json manifest = {
      {"experiment", "expressive_range"},
      {"model", report.label},
      {"kind", models::kind_name(report.kind)},
      {"n", report.n},
      {"seed", report.seed},
      {"fractions", {{"SMB_ONLY", f.smb_only}, {"KI_ONLY", f.ki_only}, {"BLENDED", f.blended}, {"EMPTY", f.empty}}},
  };
  write_text(out_dir / (stem + "_manifest.json"), manifest.dump(2) + "\n");
  written.push_back(out_dir / (stem + "_manifest.json"));
  return written;
}

std::vector<std::filesystem::path> emit_artifacts(const CornerData& data, const std::filesystem::path& out_dir) {
  prepare_dir(out_dir);
  std::vector<std::filesystem::path> written;
  const std::string stem = "corner_" + data.label;
  write_text(out_dir / (stem + ".csv"), corner_csv(data));
  written.push_back(out_dir / (stem + ".csv"));

  std::string hist = "metric,bin_lo,bin_hi,count\n";
  for (std::size_t k = 0; k < kCornerMetrics.size(); ++k) {
    for (int b = 0; b < kHistogramBins; ++b) {
      hist += std::string(kCornerMetrics[k]) + ',' + format_value(b * 100.0 / kHistogramBins) + ',' +
              format_value((b + 1) * 100.0 / kHistogramBins) + ',' +
              std::to_string(data.histograms[k][static_cast<std::size_t>(b)]) + '\n';
    }
  }
  write_text(out_dir / (stem + "_hist.csv"), hist);
  written.push_back(out_dir / (stem + "_hist.csv"));

  // Corner layout: histograms on the diagonal, pairwise scatters below it.
  constexpr int cell = 170;
  constexpr int margin = 40;
  Image image(margin + 4 * cell, margin + 4 * cell);
  for (int row = 0; row < 4; ++row) {
    for (int col = 0; col <= row; ++col) {
      plot::Panel panel(image, margin + col * cell + 6, margin + row * cell + 4, cell - 14, cell - 24);
      panel.frame("", row == 3 ? upper(kCornerMetrics[static_cast<std::size_t>(col)]) : "", "");
      if (row == col) {
        const auto& counts = data.histograms[static_cast<std::size_t>(row)];
        int total = 0;
        for (int c : counts) total += c;
        for (int b = 0; b < kHistogramBins && total > 0; ++b) {
          panel.bar(b * 10.0, (b + 1) * 10.0, static_cast<double>(counts[static_cast<std::size_t>(b)]) / total,
                    plot::kGenerated);
        }
        continue;
      }
      // Generated points first so the training overlay stays visible.
      for (PointSource source : {PointSource::Generated, PointSource::Smb, PointSource::Ki}) {
        const Rgb color = source == PointSource::Smb  ? plot::kSmbRed
                          : source == PointSource::Ki ? plot::kKiBlue
                                                      : plot::kGenerated;
        for (const auto& p : data.points) {
          if (p.source != source) continue;
          panel.point(p.values[static_cast<std::size_t>(col)], p.values[static_cast<std::size_t>(row)], color, 0);
        }
      }
    }
    plot::draw_text(image, 2, margin + row * cell + cell / 2, upper(kCornerMetrics[static_cast<std::size_t>(row)]).substr(0, 4),
                    plot::kBlack, 1);
  }
  plot::draw_text(image, margin, 8, upper(data.label) + " CORNER PLOT", plot::kBlack);
  save_png(image, out_dir / (stem + ".png"), written);

  nlohmann::json manifest = {
      {"experiment", "corner"},
      {"model", data.label},
      {"kind", models::kind_name(data.kind)},
      {"n", data.n},
      {"seed", data.seed},
      {"points", {{"generated", data.count(PointSource::Generated)},
                  {"smb", data.count(PointSource::Smb)},
                  {"ki", data.count(PointSource::Ki)}}},
      {"excluded_generated", data.excluded_generated},
      {"excluded_training", data.excluded_training},
  };
  write_text(out_dir / (stem + "_manifest.json"), manifest.dump(2) + "\n");
  written.push_back(out_dir / (stem + "_manifest.json"));
  return written;
}

std::vector<std::filesystem::path> emit_artifacts(const AccuracyReport& report,
                                                  const std::filesystem::path& out_dir) {
  prepare_dir(out_dir);
  std::vector<std::filesystem::path> written;
  write_text(out_dir / ("accuracy_" + report.label + ".csv"), accuracy_csv(report));
  written.push_back(out_dir / ("accuracy_" + report.label + ".csv"));
  write_text(out_dir / ("evolved_" + report.label + ".csv"), evolved_csv(report));
  written.push_back(out_dir / ("evolved_" + report.label + ".csv"));

  const std::array<Rgb, 5> colors{Rgb{200, 40, 40}, Rgb{40, 120, 40}, Rgb{40, 40, 200}, Rgb{200, 120, 0},
                                  Rgb{120, 0, 160}};
  std::vector<plot::Series> series;
  std::vector<std::string> objectives;
  for (const auto& row : report.rows) {
    const std::string name(evolve::objective_name(row.objective));
    if (series.empty() || series.back().name != name) {
      series.push_back({name, colors[series.size() % colors.size()], {}, {}});
      objectives.push_back(name);
    }
    if (row.defined > 0) {
      series.back().x.push_back(row.target);
      series.back().y.push_back(row.mean);
    }
  }
  save_png(plot::line_plot(series, upper(report.label) + " EVOLUTION ACCURACY", "TARGET %", "ACHIEVED %"),
           out_dir / ("accuracy_" + report.label + ".png"), written);

  std::vector<double> targets;
  for (const auto& row : report.rows) {
    if (std::find(targets.begin(), targets.end(), row.target) == targets.end()) targets.push_back(row.target);
  }
  nlohmann::json manifest = {
      {"experiment", "evolution_accuracy"},
      {"model", report.label},
      {"kind", models::kind_name(report.kind)},
      {"objectives", objectives},
      {"targets", targets},
      {"runs", report.runs},
      {"budget", report.budget},
      {"base_seed", report.base_seed},
      {"cma", {{"sigma0", evolve::EvolutionSpec{}.sigma0}, {"tolerance", evolve::EvolutionSpec{}.tolerance}}},
  };
  write_text(out_dir / ("accuracy_" + report.label + "_manifest.json"), manifest.dump(2) + "\n");
  written.push_back(out_dir / ("accuracy_" + report.label + "_manifest.json"));
  return written;
}

}  // namespace levelblend::analysis
