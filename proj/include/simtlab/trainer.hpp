#pragma once
// Deterministic training driver: offline pretraining, wait-k training, and
// CBSiMT fine-tuning, with TSV logging and per-epoch checkpoints.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "simtlab/checkpoint.hpp"
#include "simtlab/data.hpp"
#include "simtlab/loss.hpp"

namespace simtlab {

enum class TrainPhase { pretrain_offline, finetune_cbsimt, train_waitk };

inline const char* phase_name(TrainPhase p) {
  switch (p) {
    case TrainPhase::pretrain_offline: return "pretrain-offline";
    case TrainPhase::finetune_cbsimt: return "finetune-cbsimt";
    case TrainPhase::train_waitk: return "train-waitk";
  }
  return "?";
}

struct TrainPlan {
  TrainPhase phase = TrainPhase::pretrain_offline;
  double learning_rate = 2.5e-4;
  int steps = 1000;
  int batch_size = 16;
  int prefix_cap = 10;
  int k = 9;  // wait-k training k
  std::uint64_t seed = 1;
  WeightConfig weights;
  bool beta_off = false;  // ablations
  bool diag_off = false;
  int log_every = 50;
  std::string log_path;        // append-only TSV, empty = no log
  std::string checkpoint_dir;  // per-epoch checkpoints, empty = none

  void validate() const {
    if (learning_rate <= 0) throw std::invalid_argument("TrainPlan: learning rate must be > 0");
    if (prefix_cap < 1) throw std::invalid_argument("TrainPlan: prefix cap must be >= 1");
    if (steps < 0 || batch_size < 1) throw std::invalid_argument("TrainPlan: bad steps/batch");
  }
};

struct TrainResult {
  std::vector<double> loss_curve;  // one entry per step
  long clamped_cells = 0;
  double mean_beta = 1.0;
  double mean_alpha = 1.0;
};

// Teacher-forced token accuracy (all output positions including EOS).
template <class Real>
double teacher_forced_accuracy(const Model<Real>& model, const std::vector<SentencePair>& corpus,
                               std::size_t limit = 0) {
  NoGrad ng;
  long correct = 0, total = 0;
  std::size_t n = limit == 0 ? corpus.size() : std::min(limit, corpus.size());
  for (std::size_t s = 0; s < n; ++s) {
    auto src = Model<Real>::with_eos(corpus[s].source);
    auto tgt_in = Model<Real>::with_bos(corpus[s].target);
    auto tgt_out = Model<Real>::with_eos(corpus[s].target);
    auto enc = model.encode(src);
    std::vector<int> limits(tgt_in.size(), static_cast<int>(src.size()));
    auto logits = model.decode_logits(tgt_in, enc, limits);
    for (std::size_t i = 0; i < tgt_out.size(); ++i) {
      int best = 0;
      Real bv = logits.at(static_cast<int>(i), 0);
      for (int v = 1; v < logits.cols(); ++v)
        if (logits.at(static_cast<int>(i), v) > bv) {
          bv = logits.at(static_cast<int>(i), v);
          best = v;
        }
      ++total;
      if (best == tgt_out[i]) ++correct;
    }
  }
  return total ? static_cast<double>(correct) / total : 0.0;
}

template <class Real>
TrainResult run_training(Model<Real>& model, AdamState<Real>& opt,
                         const std::vector<SentencePair>& corpus, const TrainPlan& plan) {
  plan.validate();
  if (corpus.empty()) throw std::invalid_argument("run_training: empty corpus");
  opt.lr = plan.learning_rate;

  std::ofstream log;
  if (!plan.log_path.empty()) {
    bool fresh = !std::filesystem::exists(plan.log_path);
    log.open(plan.log_path, std::ios::app);
    if (fresh) log << "step\tphase\tloss\tmean_beta\tmean_alpha\twall_time_s\n";
  }
  auto t0 = std::chrono::steady_clock::now();

  TrainResult result;
  std::vector<Batch> batches;
  std::size_t cursor = 0;
  int epoch = 0;
  CbsimtOptions cb;
  cb.weights = plan.weights;
  cb.prefix_cap = plan.prefix_cap;
  cb.beta_one = plan.beta_off;
  cb.diag_one = plan.diag_off;

  double beta_acc = 0.0, alpha_acc = 0.0;
  long beta_n = 0, alpha_n = 0;

  for (int step = 1; step <= plan.steps; ++step) {
    if (cursor >= batches.size()) {
      batches = make_batches(corpus, plan.batch_size,
                             plan.seed ^ (0xA5A5A5A5ULL * static_cast<std::uint64_t>(epoch + 1)));
      cursor = 0;
      if (epoch > 0 && !plan.checkpoint_dir.empty()) {
        std::filesystem::create_directories(plan.checkpoint_dir);
        save_checkpoint(plan.checkpoint_dir + "/epoch_" + std::to_string(epoch) + ".ckpt",
                        header_for(model.config()), model.params(), &opt);
      }
      ++epoch;
    }
    const Batch& batch = batches[cursor++];
    std::vector<SentencePair> pairs;
    pairs.reserve(batch.indices.size());
    for (int idx : batch.indices) pairs.push_back(corpus[idx]);

    LossStats stats;
    Tensor<Real> loss;
    if (plan.phase == TrainPhase::finetune_cbsimt) {
      std::vector<WeightedLossBreakdown> bds;
      std::uint64_t pseed = plan.seed ^ (0xC0FFEEULL + static_cast<std::uint64_t>(step) * 0x9e3779b9ULL);
      loss = cbsimt_batch_loss(model, pairs, cb, pseed, &bds, &stats);
      for (const auto& bd : bds) {
        beta_acc += bd.beta;
        ++beta_n;
        for (const auto& row : bd.alpha)
          for (double a : row) {
            alpha_acc += a;
            ++alpha_n;
          }
      }
    } else {
      loss = Tensor<Real>({1}, Real(0));
      for (const auto& pair : pairs) {
        int j = static_cast<int>(pair.source.size()) + 1;
        int i = static_cast<int>(pair.target.size()) + 1;
        WaitKSchedule sched = plan.phase == TrainPhase::pretrain_offline
                                  ? WaitKSchedule::offline(j, i)
                                  : WaitKSchedule{plan.k, j, i};
        loss = add(loss, ce_prefix_loss(model, pair, sched, &stats));
      }
      loss = scale(loss, static_cast<Real>(1.0 / pairs.size()));
    }

    double loss_val = static_cast<double>(loss.item());
    if (!std::isfinite(loss_val))
      throw std::runtime_error(std::string("run_training: non-finite loss at step ") +
                               std::to_string(step) + " (phase " + phase_name(plan.phase) + ")");
    loss.backward();
    adam_step(model.params(), opt);
    result.loss_curve.push_back(loss_val);
    result.clamped_cells += stats.clamped;

    if (log && (step % plan.log_every == 0 || step == plan.steps)) {
      double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log << step << '\t' << phase_name(plan.phase) << '\t' << loss_val << '\t'
          << (beta_n ? beta_acc / beta_n : 1.0) << '\t' << (alpha_n ? alpha_acc / alpha_n : 1.0)
          << '\t' << wall << '\n';
    }
  }
  if (!plan.checkpoint_dir.empty()) {
    std::filesystem::create_directories(plan.checkpoint_dir);
    save_checkpoint(plan.checkpoint_dir + "/final.ckpt", header_for(model.config()), model.params(),
                    &opt);
  }
  result.mean_beta = beta_n ? beta_acc / beta_n : 1.0;
  result.mean_alpha = alpha_n ? alpha_acc / alpha_n : 1.0;
  return result;
}

}  // namespace simtlab
