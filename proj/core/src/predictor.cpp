#include "picrl/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "picrl/errors.hpp"

namespace picrl::predictor {

namespace {

constexpr double kInitialSigmaRaw = -2.2521684610440903;  // softplus^-1(0.1)

struct Samples {
  std::vector<std::vector<double>> inputs;
  std::vector<double> targets;
};

// Windows over `series` whose targets start at index `first_target`.
Samples build_samples(const std::vector<double>& series, const std::vector<std::vector<double>>& context,
                      std::size_t first_target, std::size_t window_len) {
  Samples s;
  for (std::size_t i = std::max(first_target, window_len); i < series.size(); ++i) {
    std::span<const double> window(series.data() + i - window_len, window_len);
    std::span<const double> ctx;
    if (!context.empty()) ctx = context[i - 1];
    s.inputs.push_back(make_input(window, ctx));
    s.targets.push_back(series[i]);
  }
  return s;
}

struct Evaluation {
  double nll = 0.0;
  double mae = 0.0;
};

Evaluation evaluate(const PredictorModel& model, const Samples& samples) {
  Evaluation e;
  if (samples.targets.empty()) return e;
  nn::Mlp::Tape tape;
  for (std::size_t i = 0; i < samples.targets.size(); ++i) {
    model.network().forward(samples.inputs[i], tape);
    const auto& out = tape.activations.back();
    const auto belief = stats::GaussianBelief{out[0], nn::softplus(out[1]) + stats::kSigmaFloor};
    e.nll += nll_loss(belief, samples.targets[i]);
    e.mae += std::abs(std::clamp(out[0], 0.0, 1.0) - samples.targets[i]);
  }
  e.nll /= static_cast<double>(samples.targets.size());
  e.mae /= static_cast<double>(samples.targets.size());
  return e;
}

}  // namespace

void PredictorConfig::validate() const {
  if (window_len < 2) throw ConfigError("predictor.window_len must be >= 2");
  if (hidden_width < 4) throw ConfigError("predictor.hidden_width must be >= 4");
  if (!(learning_rate > 0.0)) throw ConfigError("predictor.learning_rate must be > 0");
  if (epochs < 1) throw ConfigError("predictor.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("predictor.batch_size must be >= 1");
  if (!(grad_clip > 0.0)) throw ConfigError("predictor.grad_clip must be > 0");
}

void to_json(nlohmann::json& j, const PredictorConfig& c) {
  j = nlohmann::json{{"window_len", c.window_len}, {"hidden_width", c.hidden_width},
                     {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
                     {"seed", c.seed}, {"context_width", c.context_width},
                     {"batch_size", c.batch_size}, {"grad_clip", c.grad_clip}};
}

void from_json(const nlohmann::json& j, PredictorConfig& c) {
  j.at("window_len").get_to(c.window_len);
  j.at("hidden_width").get_to(c.hidden_width);
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("epochs").get_to(c.epochs);
  j.at("seed").get_to(c.seed);
  j.at("context_width").get_to(c.context_width);
  j.at("batch_size").get_to(c.batch_size);
  j.at("grad_clip").get_to(c.grad_clip);
}

PredictorModel::PredictorModel(PredictorConfig config, nn::Mlp network)
    : config_(config), net_(std::move(network)) {
  config_.validate();
  if (net_.input_size() != config_.window_len + config_.context_width || net_.output_size() != 2) {
    throw ShapeError("predictor network does not match its config");
  }
}

stats::GaussianBelief PredictorModel::predict(std::span<const double> window,
                                              std::span<const double> context) const {
  if (window.size() != config_.window_len) throw ShapeError("predict: window length mismatch");
  if (context.size() != config_.context_width) throw ShapeError("predict: context width mismatch");
  const auto out = net_.forward(make_input(window, context));
  return stats::GaussianBelief{std::clamp(out[0], 0.0, 1.0), nn::softplus(out[1]) + stats::kSigmaFloor};
}

nlohmann::json PredictorModel::to_json() const {
  nlohmann::json j;
  j["format"] = "picrl.predictor";
  j["version"] = 1;
  j["config"] = config_;
  j["network"] = net_.to_json();
  j["history"] = {{"train_nll", history.train_nll},
                  {"val_nll", history.val_nll},
                  {"val_mae", history.val_mae},
                  {"checkpoint_epochs", history.checkpoint_epochs},
                  {"checkpoint_val_nll", history.checkpoint_val_nll},
                  {"best_epoch", history.best_epoch},
                  {"best_val_nll", history.best_val_nll},
                  {"best_val_mae", history.best_val_mae}};
  return j;
}

PredictorModel PredictorModel::from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != "picrl.predictor" || j.value("version", 0) != 1) {
    throw ConfigError("not a version-1 predictor checkpoint");
  }
  PredictorModel model(j.at("config").get<PredictorConfig>(), nn::Mlp::from_json(j.at("network")));
  const auto& h = j.at("history");
  h.at("train_nll").get_to(model.history.train_nll);
  h.at("val_nll").get_to(model.history.val_nll);
  h.at("val_mae").get_to(model.history.val_mae);
  h.at("checkpoint_epochs").get_to(model.history.checkpoint_epochs);
  h.at("checkpoint_val_nll").get_to(model.history.checkpoint_val_nll);
  h.at("best_epoch").get_to(model.history.best_epoch);
  h.at("best_val_nll").get_to(model.history.best_val_nll);
  h.at("best_val_mae").get_to(model.history.best_val_mae);
  return model;
}

void PredictorModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

PredictorModel PredictorModel::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read " + path.string());
  return from_json(nlohmann::json::parse(in));
}

double nll_loss(const stats::GaussianBelief& pred, double d) {
  const double z = (d - pred.mean) / pred.stddev;
  return std::log(pred.stddev) + 0.5 * z * z;
}

std::vector<double> make_input(std::span<const double> window, std::span<const double> context) {
  std::vector<double> x;
  x.reserve(window.size() + context.size());
  for (double w : window) x.push_back(w - 0.5);
  for (double c : context) x.push_back(c - 0.5);
  return x;
}

double sample_loss_and_grad(const nn::Mlp& net, std::span<const double> input, double target,
                            std::span<double> grad, nn::Mlp::Tape& tape) {
  net.forward(input, tape);
  const auto& out = tape.activations.back();
  const double mu = out[0];
  const double sigma = nn::softplus(out[1]) + stats::kSigmaFloor;
  const double r = target - mu;
  const double loss = std::log(sigma) + 0.5 * r * r / (sigma * sigma);
  const double d_mu = -r / (sigma * sigma);
  const double d_sigma = 1.0 / sigma - r * r / (sigma * sigma * sigma);
  const double g[2] = {d_mu, d_sigma * nn::sigmoid(out[1])};
  net.backward(tape, g, grad);
  return loss;
}

PredictorModel train_predictor(const workload::Segment& train, const workload::Segment& val,
                               const PredictorConfig& config) {
  config.validate();
  if (train.size() <= config.window_len + 1) {
    throw ValidationError("train_predictor: training segment shorter than window_len + 2");
  }
  if (train.context_width() != config.context_width) {
    throw ShapeError("train_predictor: context width differs from config");
  }

  const Samples train_samples = build_samples(train.demands, train.context, 0, config.window_len);

  // Validation windows may start in the tail of the training segment.
  std::vector<double> joined = train.demands;
  joined.insert(joined.end(), val.demands.begin(), val.demands.end());
  std::vector<std::vector<double>> joined_ctx;
  if (config.context_width > 0) {
    joined_ctx = train.context;
    joined_ctx.insert(joined_ctx.end(), val.context.begin(), val.context.end());
  }
  const Samples val_samples = build_samples(joined, joined_ctx, train.size(), config.window_len);

  nn::Mlp net({config.window_len + config.context_width, config.hidden_width, config.hidden_width, 2},
              config.seed);
  {
    // Output biases: mean 0.5, sigma 0.1.
    auto& p = net.parameters();
    p[p.size() - 2] = 0.5;
    p[p.size() - 1] = kInitialSigmaRaw;
  }
  PredictorModel model(config, std::move(net));
  auto& params = model.network().parameters();

  nn::Adam opt(params.size(), config.learning_rate);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_samples.targets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(params.size());
  std::vector<double> best = params;
  nn::Mlp::Tape tape;

  const Samples& select = val_samples.targets.empty() ? train_samples : val_samples;
  Evaluation best_eval = evaluate(model, select);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        batch_loss += sample_loss_and_grad(model.network(), train_samples.inputs[i], train_samples.targets[i],
                                           grad, tape);
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (double& g : grad) g *= inv;
      if (!std::isfinite(batch_loss)) throw TrainingDivergedError(epoch, "non-finite training NLL");
      nn::clip_grad_norm(grad, config.grad_clip);
      opt.step(params, grad);
      epoch_loss += batch_loss;
    }
    epoch_loss /= static_cast<double>(order.size());

    const Evaluation ev = evaluate(model, select);
    if (!std::isfinite(epoch_loss) || !std::isfinite(ev.nll)) {
      throw TrainingDivergedError(epoch, "non-finite NLL");
    }
    model.history.train_nll.push_back(epoch_loss);
    model.history.val_nll.push_back(ev.nll);
    model.history.val_mae.push_back(ev.mae);
    if (ev.nll < best_eval.nll) {
      best_eval = ev;
      best = params;
      model.history.checkpoint_epochs.push_back(epoch);
      model.history.checkpoint_val_nll.push_back(ev.nll);
      model.history.best_epoch = epoch;
    }
  }
  params = best;
  model.history.best_val_nll = best_eval.nll;
  model.history.best_val_mae = best_eval.mae;
  return model;
}

}  // namespace picrl::predictor
