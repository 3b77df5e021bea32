#pragma once

#include "lpvmpc/common.hpp"
#include "lpvmpc/model.hpp"
#include "lpvmpc/plant.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace lpvmpc {

struct TrainConfig {
  Index hidden_layers = 2;
  Index nodes = 64;
  Index nx = 2;
  Index na = 4;
  Index nb = 4;
  Activation activation = Activation::Tanh;
  int epochs = 50;
  Index batch_size = 256;
  Index truncation = 40;  // T
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  bool standardize_states = true;  // rescale the latent state to unit std after training

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;  // mean truncated loss per epoch
  std::vector<double> val_loss;    // truncated loss on the validation split
  std::vector<double> val_nrms;    // free-run simulation NRMS on the validation split
  int best_epoch = 0;              // 0 is the initial model
  double best_val_nrms = 0.0;
  double test_nrms = 0.0;
};

/// One training window starting at sample k (0-based): the encoder sees
/// u_{k-n}..u_{k-1} and y_{k-n}..y_k, the rollout covers k..k+T-1.
struct Window {
  Index start = 0;
  IoWindow past;
  Matrix future_u;  // nu x T
  Matrix future_y;  // ny x T
};

/// Valid window starts of a segment [begin, end): k in [begin + n, end - T - 1].
std::pair<Index, Index> valid_start_range(Index begin, Index end, Index T, Index n);

Window sample_window(const Dataset& data, Index start, Index T, Index n);

/// Shuffled windows of the estimation split, drawn without replacement and
/// grouped into full batches.
std::vector<std::vector<Window>> make_batches(const Dataset& data, Index T, Index na, Index nb, Index batch,
                                              std::uint64_t seed);

/// Flat parameter vector over [f_net, h_net, encoder_net].
Vector model_parameters(const AnnSsModel& model);
void set_model_parameters(AnnSsModel& model, std::span<const double> values);

/// Mean squared normalized output error of encoder-initialized T-step
/// rollouts over the batch. If `grad` is non-empty it receives the gradient
/// in the model_parameters layout.
double truncated_loss(const AnnSsModel& model, std::span<const Window> batch, std::span<double> grad = {},
                      unsigned workers = 1);

/// RMS(y_true - y_pred) / std(y_true), pooled over channels.
double nrms(const Matrix& y_true, const Matrix& y_pred);

/// Free-run simulation over samples [begin, end) with the initial state
/// from the encoder window ending at `begin`. Returns ny x (end - begin).
Matrix simulate_model(const AnnSsModel& model, const Dataset& data, Index begin, Index end);

/// Free-run states x_begin..x_{end-1}, initialized like simulate_model.
Matrix simulate_states(const AnnSsModel& model, const Dataset& data, Index begin, Index end);

/// Exact reparametrization x' = diag(scale) x folded into the f, h and
/// encoder weights. Simulated outputs are unchanged up to rounding.
AnnSsModel rescale_states(const AnnSsModel& model, const Vector& scale);

/// Per-component std of the free-run states over the estimation split.
Vector state_scale(const AnnSsModel& model, const Dataset& data);

/// NRMS of a free-run simulation over [begin + n, end).
double simulation_nrms(const AnnSsModel& model, const Dataset& data, Index begin, Index end);

AnnSsModel initial_model(const Dataset& data, const TrainConfig& cfg);
IoNorm estimation_norm(const Dataset& data);

struct TrainResult {
  AnnSsModel model;
  TrainReport report;
};

TrainResult train(const Dataset& data, const TrainConfig& cfg);

}  // namespace lpvmpc
