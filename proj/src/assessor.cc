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

#include "incseg/assessor.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include <Eigen/Dense>

#include "incseg/errors.h"

namespace incseg {

double AssessorModel::Raw(std::span<const double> features) const {
  if (features.size() != weights.size()) {
    throw DataError("assessor expects " + std::to_string(weights.size()) +
                    " features, got " + std::to_string(features.size()));
  }
  double y = bias;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    y += weights[j] * (features[j] - mu[j]) / sigma[j];
  }
  return y;
}

AssessorModel FitAssessor(std::span<const ShadowPair> pairs, double lambda,
                          std::vector<std::string> names) {
  if (pairs.size() < 2) {
    throw DataError("assessor needs at least 2 training pairs, got " +
                    std::to_string(pairs.size()));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("ridge lambda must be finite and non-negative");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
  const Eigen::Index f =
      static_cast<Eigen::Index>(pairs.front().features.size());
  if (names.empty()) {
    for (Eigen::Index j = 0; j < f; ++j) {
      names.push_back("f" + std::to_string(j + 1));
    }
  }
  if (static_cast<Eigen::Index>(names.size()) != f) {
    throw DataError("feature name count does not match feature length");
  }

  Eigen::MatrixXd x(n, f);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = pairs[i];
    if (static_cast<Eigen::Index>(p.features.size()) != f) {
      throw DataError("ragged feature vectors in training pairs");
    }
    if (!std::isfinite(p.pq_score)) throw DataError("non-finite PQ target");
    for (Eigen::Index j = 0; j < f; ++j) {
      if (!std::isfinite(p.features[j])) {
        throw DataError("non-finite feature value in training pairs");
      }
      x(i, j) = p.features[j];
    }
    y(i) = p.pq_score;
  }

  AssessorModel model;
  model.names = std::move(names);
  model.lambda = lambda;
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  const Eigen::RowVectorXd sd =
      (x.array().square().colwise().sum() / static_cast<double>(n)).sqrt();
  model.mu.assign(mu.data(), mu.data() + f);
  model.sigma.resize(f);
  for (Eigen::Index j = 0; j < f; ++j) {
    model.sigma[j] = sd(j) > 1e-12 ? sd(j) : 1.0;
    x.col(j) /= model.sigma[j];
  }
  model.bias = y.mean();
  const Eigen::VectorXd yc = y.array() - model.bias;

  Eigen::VectorXd w;
  if (lambda == 0.0) {
    w = x.completeOrthogonalDecomposition().solve(yc);
  } else {
    Eigen::MatrixXd gram = x.transpose() * x / static_cast<double>(n);
    gram.diagonal().array() += lambda;
    w = gram.ldlt().solve(x.transpose() * yc / static_cast<double>(n));
  }
  model.weights.assign(w.data(), w.data() + f);
  model.training_mse = (x * w - yc).squaredNorm() / static_cast<double>(n);
  return model;
}

double PredictFromFeatures(const AssessorModel& model,
                           std::span<const double> features) {
  return std::clamp(model.Raw(features), 0.0, 1.0);
}

double PredictDifficulty(const AssessorModel& model, const ClusteringMap& cmap,
                         const FeatureOptions& options) {
  return PredictFromFeatures(model, ExtractFeatures(cmap, options));
}

void WriteAssessorModel(std::ostream& out, const AssessorModel& model) {
  char buf[64];
  auto line = [&](const std::string& key, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << key << '=' << buf << '\n';
  };
  line("bias", model.bias);
  line("lambda", model.lambda);
  for (std::size_t j = 0; j < model.names.size(); ++j) {
    line("w." + model.names[j], model.weights[j]);
  }
  for (std::size_t j = 0; j < model.names.size(); ++j) {
    line("mu." + model.names[j], model.mu[j]);
  }
  for (std::size_t j = 0; j < model.names.size(); ++j) {
    line("sigma." + model.names[j], model.sigma[j]);
  }
}

AssessorModel ReadAssessorModel(std::istream& in) {
  AssessorModel model;
  std::map<std::string, double> mu;
  std::map<std::string, double> sigma;
  bool has_bias = false;
  bool has_lambda = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    const auto fail = [&](const std::string& msg) {
      throw DataError("model line " + std::to_string(line_no) + ": " + msg);
    };
    if (eq == std::string::npos) fail("expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string text = line.substr(eq + 1);
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (text.empty() || end != text.c_str() + text.size() ||
        !std::isfinite(v)) {
      fail("bad number '" + text + "'");
    }
    if (key == "bias") {
      model.bias = v;
      has_bias = true;
    } else if (key == "lambda") {
      model.lambda = v;
      has_lambda = true;
    } else if (key.rfind("w.", 0) == 0) {
      model.names.push_back(key.substr(2));
      model.weights.push_back(v);
    } else if (key.rfind("mu.", 0) == 0) {
      mu[key.substr(3)] = v;
    } else if (key.rfind("sigma.", 0) == 0) {
      if (!(v > 0.0)) fail("sigma must be positive");
      sigma[key.substr(6)] = v;
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  if (!has_bias || !has_lambda) throw DataError("model lacks bias or lambda");
  if (mu.size() != model.names.size() || sigma.size() != model.names.size()) {
    throw DataError("model has mismatched w/mu/sigma entries");
  }
  for (const auto& name : model.names) {
    const auto m = mu.find(name);
    const auto s = sigma.find(name);
    if (m == mu.end() || s == sigma.end()) {
      throw DataError("model lacks mu or sigma for '" + name + "'");
    }
    model.mu.push_back(m->second);
    model.sigma.push_back(s->second);
  }
  return model;
}

void SaveAssessorModel(const std::filesystem::path& path,
                       const AssessorModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  WriteAssessorModel(out, model);
}

AssessorModel LoadAssessorModel(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return ReadAssessorModel(in);
}

double MembershipScore(std::span<const double> query,
                       std::span<const FeatureVector> supervised) {
  if (supervised.empty()) {
    throw DataError("membership score needs a nonempty supervised set");
  }
  double qn = 0.0;
  for (double v : query) qn += v * v;
  qn = std::sqrt(qn);
  double best = -1.0;
  for (const auto& s : supervised) {
    if (s.size() != query.size()) {
      throw DataError("membership score: feature length mismatch");
    }
    double dot = 0.0;
    double sn = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      dot += query[j] * s[j];
      sn += s[j] * s[j];
    }
    sn = std::sqrt(sn);
    const double cos = (qn > 0.0 && sn > 0.0) ? dot / (qn * sn) : 0.0;
    best = std::max(best, std::clamp(cos, -1.0, 1.0));
  }
  return (1.0 + best) / 2.0;
}

}  // namespace incseg
