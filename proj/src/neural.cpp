#include "epf/neural.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "epf/rng.hpp"

namespace epf {

namespace {

double activate(double z, Activation a) {
  return a == Activation::kRelu ? (z > 0.0 ? z : 0.0) : z;
}

// y (B x out) = x (B x in) * w^T + b
void affine_forward(const Matrix& x, const DenseLayer& layer, Matrix& z) {
  std::size_t out = layer.w.rows, in = layer.w.cols;
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* xr = x.row(r);
    double* zr = z.row(r);
    for (std::size_t j = 0; j < out; ++j) {
      const double* wj = layer.w.row(j);
      double acc = layer.b[j];
      for (std::size_t k = 0; k < in; ++k) acc += wj[k] * xr[k];
      zr[j] = acc;
    }
  }
}

struct Workspace {
  std::vector<Matrix> z;  // pre-activations per layer
  std::vector<Matrix> a;  // a[0] = input, a[l+1] = activations of layer l
};

void forward_keep(const MlpModel& model, const Matrix& x, Workspace& ws) {
  std::size_t n = model.layers.size();
  ws.z.resize(n);
  ws.a.resize(n + 1);
  ws.a[0] = x;
  for (std::size_t l = 0; l < n; ++l) {
    const DenseLayer& layer = model.layers[l];
    ws.z[l] = Matrix(x.rows, layer.w.rows);
    affine_forward(ws.a[l], layer, ws.z[l]);
    ws.a[l + 1] = ws.z[l];
    if (layer.act == Activation::kRelu)
      for (double& v : ws.a[l + 1].data) v = v > 0.0 ? v : 0.0;
  }
}

double sign0(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += l.w.data.size() + l.b.size();
  return n;
}

std::vector<double> MlpModel::forward(std::span<const double> x) const {
  if (x.size() != input_dim()) throw std::runtime_error("input dimension mismatch");
  std::vector<double> cur(x.begin(), x.end());
  for (const DenseLayer& layer : layers) {
    std::vector<double> next(layer.w.rows);
    for (std::size_t j = 0; j < layer.w.rows; ++j) {
      const double* wj = layer.w.row(j);
      double acc = layer.b[j];
      for (std::size_t k = 0; k < layer.w.cols; ++k) acc += wj[k] * cur[k];
      next[j] = activate(acc, layer.act);
    }
    cur = std::move(next);
  }
  return cur;
}

Matrix MlpModel::forward_batch(const Matrix& x) const {
  if (x.cols != input_dim()) throw std::runtime_error("input dimension mismatch");
  Matrix cur = x;
  for (const DenseLayer& layer : layers) {
    Matrix next(cur.rows, layer.w.rows);
    affine_forward(cur, layer, next);
    if (layer.act == Activation::kRelu)
      for (double& v : next.data) v = v > 0.0 ? v : 0.0;
    cur = std::move(next);
  }
  return cur;
}

MlpModel init_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed) {
  if (dims.size() < 2) throw std::runtime_error("need at least input and output dims");
  for (std::size_t d : dims)
    if (d < 1) throw std::runtime_error("layer dims must be >= 1");
  MlpModel model;
  model.seed = seed;
  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer;
    layer.w = Matrix(dims[l + 1], dims[l]);
    layer.b.assign(dims[l + 1], 0.0);
    double limit = std::sqrt(6.0 / static_cast<double>(dims[l] + dims[l + 1]));
    for (double& w : layer.w.data) w = rng.uniform(-limit, limit);
    layer.act = (l + 2 == dims.size()) ? Activation::kLinear : Activation::kRelu;
    model.layers.push_back(std::move(layer));
  }
  return model;
}

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw std::runtime_error("learning_rate must be > 0");
  if (batch_size < 1) throw std::runtime_error("batch_size must be >= 1");
  if (max_epochs < 1) throw std::runtime_error("max_epochs must be >= 1");
  if (patience < 1) throw std::runtime_error("patience must be >= 1");
}

TrainConfig TrainConfig::fine_tune_defaults() {
  TrainConfig cfg;
  cfg.learning_rate = 0.0001;
  cfg.patience = 1;
  return cfg;
}

AdamState AdamState::zeros_like(const MlpModel& model) {
  AdamState s;
  for (const DenseLayer& l : model.layers) {
    s.m.push_back({Matrix(l.w.rows, l.w.cols), std::vector<double>(l.b.size(), 0.0)});
    s.v.push_back({Matrix(l.w.rows, l.w.cols), std::vector<double>(l.b.size(), 0.0)});
  }
  return s;
}

double loss_mae(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) throw std::runtime_error("length mismatch");
  if (pred.empty()) throw std::runtime_error("empty vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

double backprop_mae(const MlpModel& model, const Matrix& x, const Matrix& y,
                    ModelGrads& grads) {
  std::size_t n_layers = model.layers.size();
  if (grads.size() != n_layers) {
    grads.clear();
    for (const DenseLayer& l : model.layers)
      grads.push_back({Matrix(l.w.rows, l.w.cols), std::vector<double>(l.b.size(), 0.0)});
  } else {
    for (LayerGrads& g : grads) {
      std::fill(g.w.data.begin(), g.w.data.end(), 0.0);
      std::fill(g.b.begin(), g.b.end(), 0.0);
    }
  }

  Workspace ws;
  forward_keep(model, x, ws);
  const Matrix& out = ws.a[n_layers];
  if (!out.same_shape(y)) throw std::runtime_error("target dimension mismatch");

  double denom = static_cast<double>(out.rows * out.cols);
  double loss = 0.0;
  Matrix delta(out.rows, out.cols);  // dL/d(pre-activation of output layer)
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    double r = out.data[i] - y.data[i];
    loss += std::abs(r);
    delta.data[i] = sign0(r) / denom;
  }
  loss /= denom;

  // Backprop is cut off below the deepest frozen prefix: gradients of frozen
  // layers are never used, so fine-tuning only walks the output layer.
  std::size_t lowest_trainable = n_layers;
  for (std::size_t l = 0; l < n_layers; ++l)
    if (model.layers[l].trainable) {
      lowest_trainable = l;
      break;
    }

  for (std::size_t li = n_layers; li-- > 0;) {
    if (li < lowest_trainable) break;
    const DenseLayer& layer = model.layers[li];
    const Matrix& a_prev = ws.a[li];
    LayerGrads& g = grads[li];
    if (layer.trainable) {
      for (std::size_t r = 0; r < delta.rows; ++r) {
        const double* dr = delta.row(r);
        const double* ar = a_prev.row(r);
        for (std::size_t j = 0; j < layer.w.rows; ++j) {
          double dj = dr[j];
          if (dj == 0.0) continue;
          g.b[j] += dj;
          double* gw = g.w.row(j);
          for (std::size_t k = 0; k < layer.w.cols; ++k) gw[k] += dj * ar[k];
        }
      }
    }
    if (li == lowest_trainable) break;  // no need to propagate further down
    // delta_prev = (delta * w) ⊙ relu'(z_prev)
    Matrix next(delta.rows, layer.w.cols);
    for (std::size_t r = 0; r < delta.rows; ++r) {
      const double* dr = delta.row(r);
      double* nr = next.row(r);
      for (std::size_t j = 0; j < layer.w.rows; ++j) {
        double dj = dr[j];
        if (dj == 0.0) continue;
        const double* wj = layer.w.row(j);
        for (std::size_t k = 0; k < layer.w.cols; ++k) nr[k] += dj * wj[k];
      }
    }
    if (model.layers[li - 1].act == Activation::kRelu) {
      const Matrix& z_prev = ws.z[li - 1];
      for (std::size_t i = 0; i < next.data.size(); ++i)
        if (z_prev.data[i] <= 0.0) next.data[i] = 0.0;
    }
    delta = std::move(next);
  }
  return loss;
}

void adam_step(MlpModel& model, const ModelGrads& grads, AdamState& state,
               const TrainConfig& cfg) {
  if (grads.size() != model.layers.size())
    throw std::runtime_error("gradient shape mismatch");
  ++state.step;
  double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    DenseLayer& layer = model.layers[l];
    if (!layer.trainable) continue;
    if (!grads[l].w.same_shape(layer.w) || grads[l].b.size() != layer.b.size())
      throw std::runtime_error("gradient shape mismatch");
    auto update = [&](double& p, double g, double& m, double& v) {
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g * g;
      double mhat = m / bc1;
      double vhat = v / bc2;
      p -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_epsilon);
    };
    for (std::size_t i = 0; i < layer.w.data.size(); ++i)
      update(layer.w.data[i], grads[l].w.data[i], state.m[l].w.data[i],
             state.v[l].w.data[i]);
    for (std::size_t i = 0; i < layer.b.size(); ++i)
      update(layer.b[i], grads[l].b[i], state.m[l].b[i], state.v[l].b[i]);
  }
}

double evaluate_mae(const MlpModel& model, const SampleSet& set) {
  if (set.size() == 0) throw std::runtime_error("empty sample set");
  Matrix out = model.forward_batch(set.inputs);
  double s = 0.0;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    s += std::abs(out.data[i] - set.targets.data[i]);
  return s / static_cast<double>(out.data.size());
}

std::pair<MlpModel, TrainTrace> train(MlpModel model, const SampleSet& train_set,
                                      const SampleSet& val_set,
                                      const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0) throw std::runtime_error("empty training set");
  if (train_set.inputs.cols != model.input_dim() ||
      train_set.targets.cols != model.output_dim() ||
      val_set.inputs.cols != model.input_dim())
    throw std::runtime_error("sample dimensions do not match model");

  std::size_t n = train_set.size();
  std::size_t batch = std::min(cfg.batch_size, n);
  Rng rng(cfg.seed);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);

  TrainTrace trace;
  EarlyStopper stopper;
  stopper.patience = cfg.patience;
  // The incoming weights are the epoch-0 baseline: fine-tuning can only keep
  // or improve the validation loss.
  double initial = evaluate_mae(model, val_set);
  trace.initial_val_loss = initial;
  stopper.best = initial;
  stopper.best_epoch = 0;

  MlpModel best = model;
  AdamState state = AdamState::zeros_like(model);
  ModelGrads grads;
  Matrix xb(batch, train_set.inputs.cols), yb(batch, train_set.targets.cols);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i)
      std::swap(perm[i - 1], perm[rng.index(i)]);
    double epoch_abs = 0.0;
    for (std::size_t off = 0; off < n; off += batch) {
      std::size_t rows = std::min(batch, n - off);
      if (xb.rows != rows) {
        xb = Matrix(rows, train_set.inputs.cols);
        yb = Matrix(rows, train_set.targets.cols);
      }
      for (std::size_t r = 0; r < rows; ++r) {
        std::size_t src = perm[off + r];
        std::copy(train_set.inputs.row(src), train_set.inputs.row(src) + xb.cols,
                  xb.row(r));
        std::copy(train_set.targets.row(src), train_set.targets.row(src) + yb.cols,
                  yb.row(r));
      }
      double batch_loss = backprop_mae(model, xb, yb, grads);
      adam_step(model, grads, state, cfg);
      epoch_abs += batch_loss * static_cast<double>(rows);
    }
    trace.train_loss.push_back(epoch_abs / static_cast<double>(n));
    double val = evaluate_mae(model, val_set);
    trace.val_loss.push_back(val);
    bool stop = stopper.observe(val);
    if (stopper.improved_last) best = model;
    if (stop) break;
  }
  trace.best_epoch = stopper.best_epoch;
  trace.stopped_epoch = stopper.epochs;
  return {std::move(best), std::move(trace)};
}

std::pair<MlpModel, TrainTrace> fine_tune(MlpModel model,
                                          const SampleSet& target_train,
                                          const SampleSet& target_val,
                                          const TrainConfig& cfg) {
  if (model.layers.empty()) throw std::runtime_error("model has no layers");
  for (std::size_t l = 0; l + 1 < model.layers.size(); ++l)
    model.layers[l].trainable = false;
  model.layers.back().trainable = true;
  return train(std::move(model), target_train, target_val, cfg);
}

std::vector<double> predict_prices(const MlpModel& model,
                                   std::span<const double> input,
                                   const TransformParams& target_params) {
  std::vector<double> out = model.forward(input);
  for (double& v : out) v = target_params.inverse(v);
  return out;
}

namespace {

using nlohmann::json;

const json& require(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end())
    throw std::runtime_error("checkpoint: missing field " + path + key);
  return *it;
}

TransformParams transform_from_json(const json& j, const std::string& path) {
  TransformParams p;
  p.median = require(j, "median", path).get<double>();
  p.mad = require(j, "mad", path).get<double>();
  return p;
}

json transform_to_json(const TransformParams& p) {
  return json{{"median", p.median}, {"mad", p.mad}};
}

}  // namespace

void save_checkpoint(const MlpModel& model, const std::string& path) {
  json j;
  j["kind"] = "mlp";
  j["seed"] = model.seed;
  j["spec"] = {{"use_temperature", model.spec.use_temperature},
               {"use_dummies", model.spec.use_dummies},
               {"price_lags", model.spec.price_lags},
               {"temperature_lags", model.spec.temperature_lags}};
  j["transform"] = {{"price", transform_to_json(model.transforms.price)},
                    {"temperature", transform_to_json(model.transforms.temperature)}};
  json layers = json::array();
  for (const DenseLayer& l : model.layers) {
    layers.push_back({{"rows", l.w.rows},
                      {"cols", l.w.cols},
                      {"weights", l.w.data},
                      {"bias", l.b},
                      {"activation", l.act == Activation::kRelu ? "relu" : "linear"},
                      {"trainable", l.trainable}});
  }
  j["layers"] = std::move(layers);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump();
}

MlpModel load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error("checkpoint: parse error in '" + path + "': " + e.what());
  }
  if (require(j, "kind", "").get<std::string>() != "mlp")
    throw std::runtime_error("checkpoint: kind is not 'mlp'");
  MlpModel model;
  model.seed = require(j, "seed", "").get<std::uint64_t>();
  const json& spec = require(j, "spec", "");
  model.spec.use_temperature = require(spec, "use_temperature", "spec.").get<bool>();
  model.spec.use_dummies = require(spec, "use_dummies", "spec.").get<bool>();
  model.spec.price_lags = require(spec, "price_lags", "spec.").get<int>();
  model.spec.temperature_lags = require(spec, "temperature_lags", "spec.").get<int>();
  const json& tx = require(j, "transform", "");
  model.transforms.price =
      transform_from_json(require(tx, "price", "transform."), "transform.price.");
  model.transforms.temperature = transform_from_json(
      require(tx, "temperature", "transform."), "transform.temperature.");
  const json& layers = require(j, "layers", "");
  if (!layers.is_array() || layers.empty())
    throw std::runtime_error("checkpoint: layers must be a non-empty array");
  std::size_t prev_out = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    std::string p = "layers[" + std::to_string(i) + "].";
    const json& lj = layers[i];
    DenseLayer l;
    std::size_t rows = require(lj, "rows", p).get<std::size_t>();
    std::size_t cols = require(lj, "cols", p).get<std::size_t>();
    l.w = Matrix(rows, cols);
    auto weights = require(lj, "weights", p).get<std::vector<double>>();
    if (weights.size() != rows * cols)
      throw std::runtime_error("checkpoint: " + p + "weights has wrong length");
    l.w.data = std::move(weights);
    l.b = require(lj, "bias", p).get<std::vector<double>>();
    if (l.b.size() != rows)
      throw std::runtime_error("checkpoint: " + p + "bias has wrong length");
    std::string act = require(lj, "activation", p).get<std::string>();
    if (act == "relu")
      l.act = Activation::kRelu;
    else if (act == "linear")
      l.act = Activation::kLinear;
    else
      throw std::runtime_error("checkpoint: " + p + "activation unknown '" + act + "'");
    l.trainable = require(lj, "trainable", p).get<bool>();
    if (i > 0 && cols != prev_out)
      throw std::runtime_error("checkpoint: " + p + "cols breaks the layer chain");
    prev_out = rows;
    model.layers.push_back(std::move(l));
  }
  return model;
}

}  // namespace epf
