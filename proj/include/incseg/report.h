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

// Multi-campaign runs and their CSV reports.

#ifndef INCSEG_REPORT_H_
#define INCSEG_REPORT_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "incseg/engine.h"

namespace incseg {

// Runs every (strategy, seed) campaign, sharing one stage-1 bootstrap per
// seed. Up to `jobs` campaigns run at once (0 = hardware concurrency).
// Results come back sorted by (strategy, seed).
std::vector<CampaignResult> RunCampaigns(
    const CampaignConfig& config, std::span<const std::string> strategies,
    std::span<const std::uint64_t> seeds, int jobs = 1,
    const StageObserver& observer = {});

// pq_based_star at each easy threshold. Sorted by (threshold, seed).
struct ThresholdRun {
  double threshold = 0.0;
  CampaignResult result;
};
std::vector<ThresholdRun> RunThresholdSweep(
    const CampaignConfig& config, std::span<const double> thresholds,
    std::span<const std::uint64_t> seeds, int jobs = 1,
    const StageObserver& observer = {});

// Middle value, or the mean of the two middle values.
double Median(std::vector<double> values);

void WriteStagesCsv(std::ostream& out, std::span<const CampaignResult> runs);
// One row per campaign: final PQs and the annotation effort.
void WriteSummaryCsv(std::ostream& out, std::span<const CampaignResult> runs);
// Rows are stages, columns strategies in the given order, cells the median
// production PQ over seeds.
void WriteCompareCsv(std::ostream& out, std::span<const CampaignResult> runs,
                     std::span<const std::string> strategies);
// threshold, mean and median final production PQ over seeds.
void WriteThresholdCsv(std::ostream& out, std::span<const ThresholdRun> runs);

}  // namespace incseg

#endif  // INCSEG_REPORT_H_
