// Copyright 2026 The incseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "incseg/report.h"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>

#include "incseg/errors.h"

namespace incseg {

namespace {

std::string Fixed(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

// Runs fn(0..count-1) on up to `jobs` threads; rethrows the first error.
template <typename F>
void ParallelFor(int count, int jobs, F&& fn) {
  if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
  jobs = std::clamp(jobs, 1, std::max(1, count));
  if (jobs == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (int j = 0; j < jobs; ++j) {
    workers.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

// Observers may be called from several threads.
StageObserver Serialized(const StageObserver& observer,
                         std::mutex& mutex) {
  if (!observer) return {};
  return [&observer, &mutex](const StageTransition& t) {
    std::lock_guard<std::mutex> lock(mutex);
    observer(t);
  };
}

std::vector<Bootstrap> Bootstraps(const CampaignConfig& config,
                                  std::span<const std::uint64_t> seeds,
                                  int jobs) {
  std::vector<Bootstrap> boots(seeds.size());
  ParallelFor(static_cast<int>(seeds.size()), jobs,
              [&](int i) { boots[i] = RunBootstrap(config, seeds[i]); });
  return boots;
}

}  // namespace

std::vector<CampaignResult> RunCampaigns(
    const CampaignConfig& config, std::span<const std::string> strategies,
    std::span<const std::uint64_t> seeds, int jobs,
    const StageObserver& observer) {
  if (seeds.empty()) throw ConfigError("no seeds given");
  std::vector<std::string> names(strategies.begin(), strategies.end());
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  for (const auto& n : names) ParseStrategy(n);
  std::vector<std::uint64_t> seed_list(seeds.begin(), seeds.end());
  std::sort(seed_list.begin(), seed_list.end());
  seed_list.erase(std::unique(seed_list.begin(), seed_list.end()),
                  seed_list.end());

  const std::vector<Bootstrap> boots = Bootstraps(config, seed_list, jobs);
  const int per_strategy = static_cast<int>(seed_list.size());
  std::vector<CampaignResult> results(names.size() * seed_list.size());
  std::mutex mutex;
  const StageObserver safe = Serialized(observer, mutex);
  ParallelFor(static_cast<int>(results.size()), jobs, [&](int i) {
    CampaignConfig c = config;
    c.strategy = names[i / per_strategy];
    const int s = i % per_strategy;
    results[i] = RunCampaign(c, seed_list[s], &boots[s], safe);
  });
  return results;
}

std::vector<ThresholdRun> RunThresholdSweep(
    const CampaignConfig& config, std::span<const double> thresholds,
    std::span<const std::uint64_t> seeds, int jobs,
    const StageObserver& observer) {
  if (seeds.empty()) throw ConfigError("no seeds given");
  if (thresholds.empty()) throw ConfigError("no threshold values given");
  std::vector<double> values(thresholds.begin(), thresholds.end());
  for (double v : values) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ConfigError("threshold " + Fixed(v) + " outside [0, 1]");
    }
  }
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<std::uint64_t> seed_list(seeds.begin(), seeds.end());
  std::sort(seed_list.begin(), seed_list.end());
  seed_list.erase(std::unique(seed_list.begin(), seed_list.end()),
                  seed_list.end());

  const std::vector<Bootstrap> boots = Bootstraps(config, seed_list, jobs);
  const int per_value = static_cast<int>(seed_list.size());
  std::vector<ThresholdRun> runs(values.size() * seed_list.size());
  std::mutex mutex;
  const StageObserver safe = Serialized(observer, mutex);
  ParallelFor(static_cast<int>(runs.size()), jobs, [&](int i) {
    CampaignConfig c = config;
    c.strategy = "pq_based_star";
    c.budget.easy_threshold = values[i / per_value];
    const int s = i % per_value;
    runs[i].threshold = c.budget.easy_threshold;
    runs[i].result = RunCampaign(c, seed_list[s], &boots[s], safe);
  });
  return runs;
}

double Median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void WriteStagesCsv(std::ostream& out, std::span<const CampaignResult> runs) {
  out << "strategy,seed,stage,production_pq,annotation_pq,hard,easy,neutral,"
         "pool,annotated_instances,cumulative_instances,assessor_mae\n";
  for (const auto& run : runs) {
    for (const auto& r : run.reports) {
      out << run.strategy << ',' << run.seed << ',' << r.stage_index << ','
          << Fixed(r.production_pq) << ',' << Fixed(r.annotation_pq) << ','
          << r.hard << ',' << r.easy << ',' << r.neutral << ',' << r.pool
          << ',' << r.annotated_instances << ',' << r.cumulative_instances
          << ',' << Fixed(r.assessor_mae) << '\n';
    }
  }
}

void WriteSummaryCsv(std::ostream& out, std::span<const CampaignResult> runs) {
  out << "strategy,seed,stages,final_production_pq,final_annotation_pq,"
         "annotated_instances,collected_instances,annotation_effort\n";
  for (const auto& run : runs) {
    if (run.reports.empty()) continue;
    const StageReport& last = run.reports.back();
    const long collected = run.collected_instances;
    const double effort =
        collected > 0 ? static_cast<double>(last.cumulative_instances) /
                            static_cast<double>(collected)
                      : 0.0;
    out << run.strategy << ',' << run.seed << ',' << run.reports.size() << ','
        << Fixed(last.production_pq) << ',' << Fixed(last.annotation_pq) << ','
        << last.cumulative_instances << ',' << collected << ','
        << Fixed(effort) << '\n';
  }
}

void WriteCompareCsv(std::ostream& out, std::span<const CampaignResult> runs,
                     std::span<const std::string> strategies) {
  std::map<std::string, std::map<int, std::vector<double>>> cells;
  int max_stage = 0;
  for (const auto& run : runs) {
    for (const auto& r : run.reports) {
      cells[run.strategy][r.stage_index].push_back(r.production_pq);
      max_stage = std::max(max_stage, r.stage_index);
    }
  }
  out << "stage";
  for (const auto& s : strategies) out << ',' << s;
  out << '\n';
  for (int stage = 1; stage <= max_stage; ++stage) {
    out << stage;
    for (const auto& s : strategies) {
      out << ',';
      const auto it = cells.find(s);
      if (it == cells.end()) continue;
      const auto cell = it->second.find(stage);
      if (cell != it->second.end()) out << Fixed(Median(cell->second));
    }
    out << '\n';
  }
}

void WriteThresholdCsv(std::ostream& out, std::span<const ThresholdRun> runs) {
  std::map<double, std::vector<double>> finals;
  for (const auto& run : runs) {
    if (run.result.reports.empty()) continue;
    finals[run.threshold].push_back(run.result.reports.back().production_pq);
  }
  out << "threshold,mean_final_pq,median_final_pq,seeds\n";
  for (const auto& [threshold, values] : finals) {
    double sum = 0.0;
    for (double v : values) sum += v;
    out << Fixed(threshold) << ',' << Fixed(sum / values.size()) << ','
        << Fixed(Median(values)) << ',' << values.size() << '\n';
  }
}

}  // namespace incseg
