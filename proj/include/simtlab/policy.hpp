#pragma once
// Streaming READ/WRITE execution. Policies are generic over a step predictor
// (source prefix, emitted prefix) -> (greedy token, confidence), so control
// flow can be exercised with a scripted table in place of the network.

#include <cmath>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "simtlab/model.hpp"
#include "simtlab/weights.hpp"

#include "json.hpp"

namespace simtlab {

enum class PolicyKind { waitk, threshold, offline };

struct InferenceConfig {
  PolicyKind policy = PolicyKind::threshold;
  double th_max = 0.9;
  int l_max = 9;
  double delta = 1.0;
  int k = 5;                 // for wait-k
  int max_output = 0;        // 0 -> 2*J + 10

  void validate() const {
    if (th_max <= 0.0 || th_max > 1.0) throw std::invalid_argument("InferenceConfig: th_max in (0,1]");
    if (l_max < 1) throw std::invalid_argument("InferenceConfig: l_max >= 1");
    if (delta <= 0.0) throw std::invalid_argument("InferenceConfig: delta > 0");
    if (k < 1) throw std::invalid_argument("InferenceConfig: k >= 1");
  }
};

struct StepRecord {
  char action = 'R';   // 'R' or 'W'
  int lag = 0;         // l at decision time
  double threshold = 0.0;
  double p_pred = 0.0;
  int token = -1;      // emitted token on WRITE
};

// One policy run. The source sequence is the model-level one (content + EOS).
struct ReadWriteTrace {
  std::vector<int> source;   // full source sequence as seen by the policy
  std::vector<int> emitted;  // written tokens, including the final EOS
  std::vector<int> delays;   // source tokens read before each WRITE
  std::vector<StepRecord> steps;
  bool truncated = false;

  void check() const {
    if (delays.size() != emitted.size())
      throw std::logic_error("ReadWriteTrace: |delays| != |emitted|");
    int prev = 0;
    for (int d : delays) {
      if (d < prev || d > static_cast<int>(source.size()))
        throw std::logic_error("ReadWriteTrace: delays not nondecreasing within bounds");
      prev = d;
    }
  }
};

// th_l = th_max * (1 - (l/l_max)^delta), clamped to 0 for l >= l_max.
inline double threshold_schedule(int lag, const InferenceConfig& cfg) {
  if (lag < 0) lag = 0;
  if (lag >= cfg.l_max) return 0.0;
  return cfg.th_max * (1.0 - std::pow(static_cast<double>(lag) / cfg.l_max, cfg.delta));
}

struct StepPrediction {
  int token = kEos;
  double prob = 0.0;
};

using StepPredictor =
    std::function<StepPrediction(const std::vector<int>& src_prefix, const std::vector<int>& emitted)>;

// Greedy argmax with ties broken by lowest token id.
template <class Real>
StepPrediction step_predict(const Model<Real>& model, const std::vector<int>& src_prefix,
                            const std::vector<int>& emitted) {
  if (src_prefix.empty()) throw std::invalid_argument("step_predict: empty source prefix");
  auto enc = [&] {
    NoGrad ng;
    return model.encode(src_prefix);
  }();
  auto dist = model.decode_distribution(Model<Real>::with_bos(emitted), enc);
  StepPrediction out;
  out.token = 0;
  out.prob = dist[0];
  for (std::size_t t = 1; t < dist.size(); ++t)
    if (dist[t] > out.prob) {
      out.prob = dist[t];
      out.token = static_cast<int>(t);
    }
  return out;
}

template <class Real>
StepPredictor model_predictor(const Model<Real>& model) {
  return [&model](const std::vector<int>& x, const std::vector<int>& y) {
    return step_predict(model, x, y);
  };
}

// Scripted test double: confidences and tokens from a table keyed by
// (|source read|, |emitted|); control flow testing without a network.
struct ScriptedModel {
  // script[j-1][i] = prediction when j source tokens are read and i tokens emitted
  std::vector<std::vector<StepPrediction>> script;

  StepPrediction operator()(const std::vector<int>& x, const std::vector<int>& y) const {
    std::size_t j = x.size(), i = y.size();
    if (j < 1 || j > script.size() || i >= script[j - 1].size())
      throw std::out_of_range("ScriptedModel: no entry for (" + std::to_string(j) + "," +
                              std::to_string(i) + ")");
    return script[j - 1][i];
  }
};

// Algorithm: start with one pre-read token; WRITE when confidence clears the
// lag-dependent threshold or the source is exhausted, otherwise READ.
inline ReadWriteTrace translate_threshold(const StepPredictor& predict,
                                          const std::vector<int>& source,
                                          const InferenceConfig& cfg) {
  cfg.validate();
  if (source.empty() || source.back() != kEos)
    throw std::invalid_argument("translate_threshold: source must terminate with EOS");
  int j_total = static_cast<int>(source.size());
  int cap = cfg.max_output > 0 ? cfg.max_output : 2 * j_total + 10;

  ReadWriteTrace trace;
  trace.source = source;
  std::vector<int> read(source.begin(), source.begin() + 1);
  while (true) {
    int lag = static_cast<int>(read.size()) - static_cast<int>(trace.emitted.size());
    double th = threshold_schedule(lag, cfg);
    auto pred = predict(read, trace.emitted);
    bool exhausted = static_cast<int>(read.size()) == j_total;  // last read token is EOS
    StepRecord rec{'R', lag, th, pred.prob, -1};
    if (pred.prob >= th || exhausted) {
      rec.action = 'W';
      rec.token = pred.token;
      trace.emitted.push_back(pred.token);
      trace.delays.push_back(static_cast<int>(read.size()));
      trace.steps.push_back(rec);
      if (pred.token == kEos) break;
      if (static_cast<int>(trace.emitted.size()) >= cap) {
        trace.truncated = true;
        trace.emitted.push_back(kEos);
        trace.delays.push_back(static_cast<int>(read.size()));
        break;
      }
    } else {
      trace.steps.push_back(rec);
      read.push_back(source[read.size()]);
    }
  }
  trace.check();
  return trace;
}

inline ReadWriteTrace translate_waitk(const StepPredictor& predict, const std::vector<int>& source,
                                      int k, int max_output = 0) {
  if (k < 1) throw std::invalid_argument("translate_waitk: k >= 1");
  if (source.empty() || source.back() != kEos)
    throw std::invalid_argument("translate_waitk: source must terminate with EOS");
  int j_total = static_cast<int>(source.size());
  int cap = max_output > 0 ? max_output : 2 * j_total + 10;

  ReadWriteTrace trace;
  trace.source = source;
  while (true) {
    int i = static_cast<int>(trace.emitted.size()) + 1;
    int g = wait_k_prefix(i, k, j_total);
    std::vector<int> read(source.begin(), source.begin() + g);
    auto pred = predict(read, trace.emitted);
    trace.steps.push_back({'W', g - i + 1, 0.0, pred.prob, pred.token});
    trace.emitted.push_back(pred.token);
    trace.delays.push_back(g);
    if (pred.token == kEos) break;
    if (static_cast<int>(trace.emitted.size()) >= cap) {
      trace.truncated = true;
      trace.emitted.push_back(kEos);
      trace.delays.push_back(g);
      break;
    }
  }
  trace.check();
  return trace;
}

// Full-source greedy decode; the wait-k trace with k = J.
inline ReadWriteTrace translate_offline(const StepPredictor& predict,
                                        const std::vector<int>& source, int max_output = 0) {
  return translate_waitk(predict, source, static_cast<int>(source.size()), max_output);
}

// ---- trace files (JSON lines) ----

inline void write_traces(const std::string& path, const std::vector<ReadWriteTrace>& traces) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("write_traces: cannot open " + path);
  for (const auto& t : traces) {
    nlohmann::json j;
    j["source"] = t.source;
    j["hypothesis"] = t.emitted;
    j["delays"] = t.delays;
    std::string actions;
    for (const auto& s : t.steps) actions.push_back(s.action);
    j["actions"] = actions;
    if (t.truncated) j["truncated"] = true;
    os << j.dump() << "\n";
  }
}

inline std::vector<ReadWriteTrace> read_traces(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_traces: cannot open " + path);
  std::vector<ReadWriteTrace> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    ReadWriteTrace t;
    t.source = j.at("source").get<std::vector<int>>();
    t.emitted = j.at("hypothesis").get<std::vector<int>>();
    t.delays = j.at("delays").get<std::vector<int>>();
    if (j.contains("actions"))
      for (char c : j.at("actions").get<std::string>()) t.steps.push_back({c});
    t.truncated = j.value("truncated", false);
    out.push_back(std::move(t));
  }
  return out;
}

// Content-level view for metrics: strip special tokens from the hypothesis and
// cap delays at the content source length (reading EOS adds no content).
struct ContentTrace {
  std::vector<int> tokens;
  std::vector<int> delays;
};

inline ContentTrace content_view(const ReadWriteTrace& trace) {
  int content_j = static_cast<int>(trace.source.size());
  if (!trace.source.empty() && trace.source.back() == kEos) --content_j;
  ContentTrace out;
  for (std::size_t i = 0; i < trace.emitted.size(); ++i) {
    if (trace.emitted[i] == kEos || trace.emitted[i] == kBos || trace.emitted[i] == kPad) continue;
    out.tokens.push_back(trace.emitted[i]);
    out.delays.push_back(std::min(trace.delays[i], content_j));
  }
  return out;
}

}  // namespace simtlab
