#include "qifsnn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "qifsnn/error.hpp"
#include "qifsnn/io.hpp"
#include "qifsnn/rng.hpp"

namespace qifsnn {

namespace {

std::vector<std::int8_t> spike_signature(Network& net, const ForwardRecord& rec) {
  const auto layers = net.spiking_layers();
  const auto traces = rec.spiking_layers();
  std::vector<std::int8_t> sig;
  for (std::size_t k = 0; k < traces.size(); ++k) {
    const auto& s = layers[k]->surrogate();
    const SpikeTrace& tr = *traces[k];
    for (std::size_t i = 0; i < tr.membrane.size(); ++i) {
      sig.push_back(static_cast<std::int8_t>(3 * tr.reset[i] + s.band(tr.membrane[i]) + 1));
    }
  }
  return sig;
}

class RelaxedScope {
 public:
  explicit RelaxedScope(Network& net) : net_(net), saved_(snapshot(net)), was_(net.relaxed()) {
    net_.set_relaxed(true);
  }
  ~RelaxedScope() {
    net_.set_relaxed(was_);
    restore(net_, saved_);
  }
  RelaxedScope(const RelaxedScope&) = delete;
  RelaxedScope& operator=(const RelaxedScope&) = delete;

 private:
  Network& net_;
  std::vector<NamedTensor> saved_;
  bool was_;
};

}  // namespace

double cross_entropy(std::span<const double> logits, std::span<const double> target) {
  if (logits.size() != target.size() || logits.empty()) {
    throw Error(ErrorKind::ShapeMismatch, "cross entropy needs equal, non-empty lengths");
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - peak);
  const double log_norm = peak + std::log(sum);
  double loss = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (target[k] != 0.0) loss += target[k] * (log_norm - logits[k]);
  }
  return loss;
}

BatchLoss batch_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw Error(ErrorKind::ShapeMismatch, "logits " + shape_string(logits.shape()) + " vs " +
                                              std::to_string(labels.size()) + " labels");
  }
  const std::size_t B = logits.dim(0), C = logits.dim(1);
  BatchLoss out;
  out.grad = Tensor(logits.shape());
  for (std::size_t b = 0; b < B; ++b) {
    const auto row = logits.row(b);
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= C) {
      throw Error(ErrorKind::ShapeMismatch, "label " + std::to_string(labels[b]) + " outside readout");
    }
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double z : row) sum += std::exp(z - peak);
    const double log_norm = peak + std::log(sum);
    out.loss += log_norm - row[labels[b]];
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == static_cast<std::size_t>(labels[b])) ++out.correct;
    for (std::size_t k = 0; k < C; ++k) {
      const double p = std::exp(row[k] - log_norm);
      out.grad[b * C + k] = (p - (k == static_cast<std::size_t>(labels[b]) ? 1.0 : 0.0)) / B;
    }
  }
  out.loss /= static_cast<double>(B);
  return out;
}

GradientSet stbp_backward(Network& net, const ForwardRecord& record, const Tensor& loss_grad) {
  if (record.layers.empty() || record.readout_input.empty()) {
    throw Error(ErrorKind::IncompleteRecord, "forward record is empty");
  }
  for (const SpikeTrace* st : record.spiking_layers()) {
    if (st->membrane.dim(0) != record.timesteps * record.batch) {
      throw Error(ErrorKind::IncompleteRecord, "spike trace does not cover every timestep");
    }
  }
  net.zero_grad();
  net.backward(record, loss_grad);
  GradientSet out;
  for (const auto& p : net.parameters()) {
    out.push_back({p.name, Tensor(p.shape, std::vector<double>(p.grad.begin(), p.grad.end()))});
  }
  return out;
}

GradCheckReport finite_difference_check(Network& net, const Tensor& inputs, std::span<const int> labels,
                                        const GradCheckOptions& opts) {
  RelaxedScope scope(net);
  auto loss_of = [&](std::vector<std::int8_t>* sig) {
    auto rec = net.forward_static(inputs, Mode::Train);
    if (sig) *sig = spike_signature(net, rec);
    return batch_cross_entropy(rec.output, labels).loss;
  };

  auto rec = net.forward_static(inputs, Mode::Train);
  const auto base_sig = spike_signature(net, rec);
  const auto loss = batch_cross_entropy(rec.output, labels);
  const GradientSet analytic = stbp_backward(net, rec, loss.grad);

  auto params = net.parameters();
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t k = 0; k < params.size(); ++k)
    for (std::size_t i = 0; i < params[k].value.size(); ++i) all.emplace_back(k, i);
  std::vector<std::pair<std::size_t, std::size_t>> picked;
  auto rng = make_rng(opts.seed, "gradcheck");
  std::sample(all.begin(), all.end(), std::back_inserter(picked), opts.samples, rng);

  GradCheckReport report;
  std::vector<std::int8_t> sig;
  for (auto [k, i] : picked) {
    double& w = params[k].value[i];
    const double original = w;
    w = original + opts.epsilon;
    const double up = loss_of(&sig);
    bool smooth = sig == base_sig;
    w = original - opts.epsilon;
    const double down = loss_of(&sig);
    smooth = smooth && sig == base_sig;
    w = original;
    if (!smooth) {
      ++report.excluded;
      continue;
    }
    const double numeric = (up - down) / (2.0 * opts.epsilon);
    const double a = analytic[k].tensor[i];
    const double denom = std::max({std::fabs(a), std::fabs(numeric), opts.denominator_floor});
    const double rel = std::fabs(a - numeric) / denom;
    ++report.checked;
    if (rel > report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_parameter = params[k].name + "[" + std::to_string(i) + "]";
    }
  }
  return report;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw Error(ErrorKind::InvalidParams, "learning rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(ErrorKind::InvalidParams, "momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw Error(ErrorKind::InvalidParams, "weight decay must be >= 0");
  if (epochs == 0 || batch_size == 0 || timesteps == 0) {
    throw Error(ErrorKind::InvalidParams, "epochs, batch size and timesteps must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorKind::InvalidParams, "dropout must be in [0, 1)");
  if (!(grad_clip >= 0.0)) throw Error(ErrorKind::InvalidParams, "grad clip must be >= 0");
}

double evaluate(Network& net, const Dataset& data, std::size_t batch_size) {
  if (data.size() == 0) return 0.0;
  std::size_t correct = 0;
  std::vector<std::size_t> rows;
  for (std::size_t first = 0; first < data.size(); first += batch_size) {
    rows.resize(std::min(batch_size, data.size() - first));
    std::iota(rows.begin(), rows.end(), first);
    auto rec = net.forward_static(data.batch(rows), Mode::Eval);
    correct += batch_cross_entropy(rec.output, data.batch_labels(rows)).correct;
  }
  return static_cast<double>(correct) / data.size();
}

TrainLog train(Network& net, const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
               const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (cfg.timesteps != net.spec().timesteps) {
    throw Error(ErrorKind::ConfigError, "training timesteps differ from the network's");
  }
  if (train_set.sample_shape() != net.spec().input_shape) {
    throw Error(ErrorKind::ShapeMismatch, "dataset samples " + shape_string(train_set.sample_shape()) +
                                              " do not match network input " +
                                              shape_string(net.spec().input_shape));
  }
  if (train_set.classes > net.spec().classes) {
    throw Error(ErrorKind::ShapeMismatch, "dataset has more classes than the readout");
  }
  net.set_surrogate(cfg.surrogate);

  Optimizer opt({cfg.optimizer, cfg.momentum, cfg.weight_decay});
  auto shuffle_rng = make_rng(cfg.seed, "shuffle");
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  TrainLog log;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = scheduled_lr(cfg.scheduler, cfg.learning_rate, epoch, cfg.epochs);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - first);
      std::span<const std::size_t> rows(order.data() + first, count);
      net.zero_grad();
      auto rec = net.forward_static(train_set.batch(rows), Mode::Train);
      const auto labels = train_set.batch_labels(rows);
      auto loss = batch_cross_entropy(rec.output, labels);
      if (!std::isfinite(loss.loss)) throw Error(ErrorKind::NonFiniteValue, "training loss is not finite");
      net.backward(rec, loss.grad);
      auto params = net.parameters();
      for (const auto& p : params) {
        for (double g : p.grad) {
          if (!std::isfinite(g)) throw Error(ErrorKind::NonFiniteValue, "gradient of " + p.name + " is not finite");
        }
      }
      if (cfg.grad_clip > 0.0) clip_grad_norm(params, cfg.grad_clip);
      opt.step(params, lr);
      loss_sum += loss.loss * count;
      correct += loss.correct;
    }

    EpochLog row;
    row.epoch = epoch + 1;
    row.loss = loss_sum / train_set.size();
    row.train_accuracy = static_cast<double>(correct) / train_set.size();
    row.test_accuracy = evaluate(net, test_set);
    row.learning_rate = lr;
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (log.epochs.empty() || row.test_accuracy > log.best_test_accuracy) {
      log.best_test_accuracy = row.test_accuracy;
      log.best_epoch = row.epoch;
    }
    log.epochs.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  return log;
}

std::string training_log_csv(const TrainLog& log) {
  CsvWriter csv({"epoch", "loss", "train_acc", "test_acc", "lr"});
  for (const auto& e : log.epochs) csv.row(e.epoch, e.loss, e.train_accuracy, e.test_accuracy, e.learning_rate);
  return csv.str();
}

}  // namespace qifsnn
