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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <vector>

#include "incseg/assessor.h"
#include "incseg/cli.h"
#include "incseg/config.h"
#include "incseg/engine.h"
#include "incseg/errors.h"
#include "incseg/features.h"
#include "incseg/segmap.h"
#include "incseg/shadow.h"
#include "incseg/simworld.h"

namespace py = pybind11;

namespace incseg {
namespace {

using IdArray = py::array_t<InstanceId, py::array::c_style | py::array::forcecast>;
using ProbArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

InstanceMap ToInstanceMap(const IdArray& a) {
  if (a.ndim() != 2) throw DataError("instance map must be a 2-D array");
  const int h = static_cast<int>(a.shape(0));
  const int w = static_cast<int>(a.shape(1));
  return InstanceMap(w, h, std::vector<InstanceId>(a.data(), a.data() + a.size()));
}

IdArray FromInstanceMap(const InstanceMap& map) {
  IdArray out({map.height(), map.width()});
  std::copy(map.labels().begin(), map.labels().end(), out.mutable_data());
  return out;
}

ClusteringMap ToClusteringMap(const ProbArray& a) {
  if (a.ndim() != 3 || a.shape(2) < 2) {
    throw DataError("clustering map must be an (H, W, K+1) array with K >= 1");
  }
  return ClusteringMap(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)),
                       static_cast<int>(a.shape(2)) - 1,
                       std::vector<double>(a.data(), a.data() + a.size()));
}

ProbArray FromClusteringMap(const ClusteringMap& cmap) {
  ProbArray out({cmap.height(), cmap.width(), cmap.channels()});
  std::copy(cmap.probs().begin(), cmap.probs().end(), out.mutable_data());
  return out;
}

py::dict PqDict(const PQResult& r) {
  py::dict d;
  d["pq"] = r.pq;
  d["sq"] = r.sq;
  d["rq"] = r.rq;
  d["tp"] = r.tp_count;
  d["fp"] = r.fp_count;
  d["fn"] = r.fn_count;
  d["sum_iou"] = r.sum_iou;
  return d;
}

py::dict ReportDict(const StageReport& r) {
  py::dict d;
  d["stage"] = r.stage_index;
  d["production_pq"] = r.production_pq;
  d["annotation_pq"] = r.annotation_pq;
  d["hard"] = r.hard;
  d["easy"] = r.easy;
  d["neutral"] = r.neutral;
  d["pool"] = r.pool;
  d["annotated_instances"] = r.annotated_instances;
  d["cumulative_instances"] = r.cumulative_instances;
  d["assessor_mae"] = r.assessor_mae;
  return d;
}

std::vector<ShadowPair> ToPairs(const std::vector<std::vector<double>>& features,
                                const std::vector<double>& scores) {
  if (features.size() != scores.size()) {
    throw DataError("features and scores differ in length");
  }
  std::vector<ShadowPair> pairs;
  pairs.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    pairs.push_back({features[i], scores[i]});
  }
  return pairs;
}

}  // namespace
}  // namespace incseg

PYBIND11_MODULE(_core, m) {
  using namespace incseg;
  m.doc() = "Incremental instance-segmentation learning lab";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<CalibrationError>(m, "CalibrationError",
                                           PyExc_RuntimeError);

  m.def(
      "panoptic_quality",
      [](const IdArray& pred, const IdArray& gt) {
        return PqDict(PanopticQuality(ToInstanceMap(pred), ToInstanceMap(gt)));
      },
      py::arg("pred"), py::arg("gt"),
      "PQ, SQ, RQ and match counts of two (H, W) instance-id arrays.");

  m.def(
      "match_instances",
      [](const IdArray& pred, const IdArray& gt) {
        std::vector<std::tuple<InstanceId, InstanceId, double>> out;
        for (const Match& mt :
             MatchInstances(ToInstanceMap(pred), ToInstanceMap(gt)).matches) {
          out.emplace_back(mt.pred_id, mt.gt_id, mt.iou);
        }
        return out;
      },
      py::arg("pred"), py::arg("gt"));

  m.def(
      "decode_clustering",
      [](const ProbArray& probs, int min_area) {
        return FromInstanceMap(DecodeClustering(ToClusteringMap(probs), min_area));
      },
      py::arg("probs"), py::arg("min_area") = kDefaultMinArea,
      "Argmax over layers, then per-layer 4-connected components.");

  m.def(
      "extract_features",
      [](const ProbArray& probs, int instance_cap, int min_area) {
        return ExtractFeatures(ToClusteringMap(probs), {instance_cap, min_area});
      },
      py::arg("probs"), py::arg("instance_cap") = kDefaultInstanceCap,
      py::arg("min_area") = kDefaultMinArea);
  m.def("feature_names", &FeatureNames, py::arg("layer_count") = 4);

  py::class_<AssessorModel>(m, "AssessorModel")
      .def_readonly("names", &AssessorModel::names)
      .def_readonly("weights", &AssessorModel::weights)
      .def_readonly("bias", &AssessorModel::bias)
      .def_readonly("lambda_", &AssessorModel::lambda)
      .def_readonly("mu", &AssessorModel::mu)
      .def_readonly("sigma", &AssessorModel::sigma)
      .def_readonly("training_mse", &AssessorModel::training_mse)
      .def(
          "predict",
          [](const AssessorModel& model, const std::vector<double>& features) {
            return PredictFromFeatures(model, features);
          },
          py::arg("features"))
      .def("__repr__", [](const AssessorModel& model) {
        std::ostringstream s;
        WriteAssessorModel(s, model);
        return s.str();
      });

  m.def(
      "fit_assessor",
      [](const std::vector<std::vector<double>>& features,
         const std::vector<double>& scores, double lambda) {
        return FitAssessor(ToPairs(features, scores), lambda);
      },
      py::arg("features"), py::arg("scores"),
      py::arg("lambda_") = kDefaultRidgeLambda,
      "Ridge regression of PQ on standardized features.");

  m.def(
      "membership_score",
      [](const std::vector<double>& query,
         const std::vector<std::vector<double>>& supervised) {
        return MembershipScore(query, supervised);
      },
      py::arg("query"), py::arg("supervised"));

  m.def(
      "rebalance_uniform",
      [](const std::vector<double>& scores, int bins, int per_bin_cap,
         std::uint64_t seed) {
        std::vector<ShadowPair> pairs;
        for (std::size_t i = 0; i < scores.size(); ++i) {
          pairs.push_back({{static_cast<double>(i)}, scores[i]});
        }
        Rng rng(seed);
        std::vector<std::size_t> kept;
        for (const auto& p : RebalanceUniform(pairs, bins, per_bin_cap, rng)) {
          kept.push_back(static_cast<std::size_t>(p.features[0]));
        }
        return kept;
      },
      py::arg("scores"), py::arg("bins") = 10, py::arg("per_bin_cap") = 910,
      py::arg("seed") = 0, "Indices of the kept pairs, in input order.");

  m.def(
      "route",
      [](const std::vector<std::tuple<SampleId, double, int>>& candidates,
         int budget_instances, double easy_threshold) {
        std::vector<ScoredCandidate> scored;
        for (const auto& [id, score, count] : candidates) {
          scored.push_back({id, score, count});
        }
        const RoutingDecision r = Route(scored, budget_instances, easy_threshold);
        py::dict d;
        d["hard"] = r.hard;
        d["easy"] = r.easy;
        d["neutral"] = r.neutral;
        return d;
      },
      py::arg("candidates"), py::arg("budget_instances"),
      py::arg("easy_threshold"),
      "candidates: (id, predicted_pq, instance_count) tuples.");
  m.def("budgeted_instances", &BudgetedInstances,
        py::arg("annotation_fraction"), py::arg("package_instances"));

  m.def(
      "expected_pq",
      [](double skill, double difficulty, double alpha, double floor) {
        SimModel model;
        model.skill = skill;
        model.alpha = alpha;
        model.floor = floor;
        return ExpectedPq(model, difficulty);
      },
      py::arg("skill"), py::arg("difficulty"), py::arg("alpha") = 0.7,
      py::arg("floor") = 0.2);

  m.def(
      "generate_scene",
      [](int instance_count, std::uint64_t seed) {
        Rng rng(seed);
        const Sample s = GenerateScene(SceneParams{}, instance_count, 1, rng);
        return py::make_tuple(FromInstanceMap(s.gt), s.difficulty);
      },
      py::arg("instance_count"), py::arg("seed"),
      "Returns (ground-truth id array, intrinsic difficulty).");

  m.def(
      "simulate_inference",
      [](const IdArray& gt, double target_pq, std::uint64_t seed) {
        Sample sample;
        sample.gt = ToInstanceMap(gt);
        sample.instance_count = sample.gt.InstanceCount();
        sample.difficulty = IntrinsicDifficulty(sample.gt);
        Rng rng(seed);
        const InferenceResult r =
            SimulateInferenceAt(SimModel{}, sample, target_pq, rng);
        return py::make_tuple(FromClusteringMap(r.cmap), r.achieved_pq);
      },
      py::arg("gt"), py::arg("target_pq"), py::arg("seed") = 0,
      "Clustering map whose decode scores about target_pq against gt.");

  m.def(
      "run_campaign",
      [](const std::string& config_text, const std::string& strategy,
         std::uint64_t seed) {
        CampaignConfig config = ParseConfigText(config_text);
        if (!strategy.empty()) config.strategy = strategy;
        config.Validate();
        CampaignResult result;
        {
          py::gil_scoped_release release;
          result = RunCampaign(config, seed);
        }
        py::list reports;
        for (const auto& r : result.reports) reports.append(ReportDict(r));
        return reports;
      },
      py::arg("config_text") = "", py::arg("strategy") = "pq_based",
      py::arg("seed") = 1, "Per-stage reports of one campaign.");
  m.def("strategy_names", &StrategyNames);

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv = {"incseg"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out;
        std::ostringstream err;
        const int code =
            RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command-line tool; returns (code, out, err).");
}
