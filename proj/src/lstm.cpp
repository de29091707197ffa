#include "lstm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include <json.hpp>

#include "errors.hpp"
#include "util.hpp"

namespace aqua {

namespace {

Eigen::VectorXd sigmoid(const Eigen::VectorXd& x) {
    return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

}  // namespace

Eigen::MatrixXd glorot_uniform_init(std::size_t fan_in, std::size_t fan_out, Rng& rng,
                                    std::size_t rows, std::size_t cols) {
    if (fan_in == 0 || fan_out == 0) {
        throw ConfigError("glorot_uniform_init: fans must be positive");
    }
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            m(r, c) = rng.uniform(-limit, limit);
        }
    }
    return m;
}

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (decay_rate <= 0.0 || decay_rate > 1.0) throw ConfigError("decay_rate must be in (0, 1]");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw ConfigError("dropout_rate must be in [0, 1)");
    }
    if (window < 1) throw ConfigError("window must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
}

double TrainConfig::effective_lr(std::size_t epoch) const {
    return learning_rate * std::pow(decay_rate, static_cast<double>(epoch));
}

void LstmModel::for_each_param(const std::function<void(Eigen::Map<Eigen::VectorXd>)>& fn) {
    for (Eigen::MatrixXd* m : {&W_f, &W_i, &W_o, &W_c, &U_f, &U_i, &U_o, &U_c}) {
        fn(Eigen::Map<Eigen::VectorXd>(m->data(), m->size()));
    }
    for (Eigen::VectorXd* v : {&b_f, &b_i, &b_o, &b_c, &head_w}) {
        fn(Eigen::Map<Eigen::VectorXd>(v->data(), v->size()));
    }
    fn(Eigen::Map<Eigen::VectorXd>(&head_b, 1));
}

std::size_t LstmModel::param_count() const {
    std::size_t h = hidden_dim, d = input_dim;
    return 4 * h * d + 4 * h * h + 4 * h + h + 1;
}

void LstmGradients::for_each_param(const std::function<void(Eigen::Map<Eigen::VectorXd>)>& fn) {
    for (Eigen::MatrixXd* m : {&W_f, &W_i, &W_o, &W_c, &U_f, &U_i, &U_o, &U_c}) {
        fn(Eigen::Map<Eigen::VectorXd>(m->data(), m->size()));
    }
    for (Eigen::VectorXd* v : {&b_f, &b_i, &b_o, &b_c, &head_w}) {
        fn(Eigen::Map<Eigen::VectorXd>(v->data(), v->size()));
    }
    fn(Eigen::Map<Eigen::VectorXd>(&head_b, 1));
}

void LstmGradients::setZero(const LstmModel& model) {
    auto h = static_cast<Eigen::Index>(model.hidden_dim);
    auto d = static_cast<Eigen::Index>(model.input_dim);
    for (Eigen::MatrixXd* m : {&W_f, &W_i, &W_o, &W_c}) *m = Eigen::MatrixXd::Zero(h, d);
    for (Eigen::MatrixXd* m : {&U_f, &U_i, &U_o, &U_c}) *m = Eigen::MatrixXd::Zero(h, h);
    for (Eigen::VectorXd* v : {&b_f, &b_i, &b_o, &b_c, &head_w}) *v = Eigen::VectorXd::Zero(h);
    head_b = 0.0;
}

LstmModel make_lstm(std::size_t input_dim, std::size_t hidden_dim, double dropout_rate,
                    std::uint64_t seed) {
    if (input_dim == 0 || hidden_dim == 0) {
        throw ConfigError("make_lstm: dimensions must be positive");
    }
    LstmModel m;
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    m.dropout_rate = dropout_rate;
    m.rng_seed = seed;

    Rng rng(seed);
    auto h = static_cast<Eigen::Index>(hidden_dim);
    for (Eigen::MatrixXd* w : {&m.W_f, &m.W_i, &m.W_o, &m.W_c}) {
        *w = glorot_uniform_init(input_dim, hidden_dim, rng, hidden_dim, input_dim);
    }
    for (Eigen::MatrixXd* u : {&m.U_f, &m.U_i, &m.U_o, &m.U_c}) {
        *u = glorot_uniform_init(hidden_dim, hidden_dim, rng, hidden_dim, hidden_dim);
    }
    for (Eigen::VectorXd* b : {&m.b_f, &m.b_i, &m.b_o, &m.b_c}) {
        *b = Eigen::VectorXd::Zero(h);
    }
    Eigen::MatrixXd hw = glorot_uniform_init(hidden_dim, 1, rng, h, 1);
    m.head_w = hw.col(0);
    m.head_b = 0.0;
    return m;
}

double lstm_forward(const LstmModel& model, const Eigen::MatrixXd& window, bool dropout_active,
                    Rng& rng, LstmCache* cache) {
    if (static_cast<std::size_t>(window.cols()) != model.input_dim) {
        throw DataError("lstm_forward: window has " + std::to_string(window.cols()) +
                        " columns, model expects " + std::to_string(model.input_dim));
    }
    const auto steps = window.rows();
    const auto h_dim = static_cast<Eigen::Index>(model.hidden_dim);

    Eigen::VectorXd h = Eigen::VectorXd::Zero(h_dim);
    Eigen::VectorXd c = Eigen::VectorXd::Zero(h_dim);
    LstmCache local;
    LstmCache& cc = cache ? *cache : local;
    cc.window = window;
    cc.f.clear();
    cc.i.clear();
    cc.o.clear();
    cc.g.clear();
    cc.c.clear();
    cc.h.clear();
    cc.tanh_c.clear();

    for (Eigen::Index t = 0; t < steps; ++t) {
        Eigen::VectorXd x = window.row(t).transpose();
        Eigen::VectorXd f = sigmoid(model.W_f * x + model.U_f * h + model.b_f);
        Eigen::VectorXd i = sigmoid(model.W_i * x + model.U_i * h + model.b_i);
        Eigen::VectorXd o = sigmoid(model.W_o * x + model.U_o * h + model.b_o);
        Eigen::VectorXd g = (model.W_c * x + model.U_c * h + model.b_c).array().tanh();
        c = f.cwiseProduct(c) + i.cwiseProduct(g);
        Eigen::VectorXd tc = c.array().tanh();
        h = o.cwiseProduct(tc);
        cc.f.push_back(f);
        cc.i.push_back(i);
        cc.o.push_back(o);
        cc.g.push_back(g);
        cc.c.push_back(c);
        cc.tanh_c.push_back(tc);
        cc.h.push_back(h);
    }

    cc.dropout_mask = Eigen::VectorXd::Ones(h_dim);
    if (dropout_active && model.dropout_rate > 0.0) {
        double keep = 1.0 - model.dropout_rate;
        for (Eigen::Index j = 0; j < h_dim; ++j) {
            cc.dropout_mask(j) = rng.next_double() < keep ? 1.0 / keep : 0.0;
        }
    }
    Eigen::VectorXd h_out = h.cwiseProduct(cc.dropout_mask);
    cc.prediction = model.head_w.dot(h_out) + model.head_b;
    return cc.prediction;
}

void lstm_backward(const LstmModel& model, const LstmCache& cache, double loss_grad,
                   LstmGradients& grads) {
    const auto steps = static_cast<Eigen::Index>(cache.h.size());
    if (steps == 0 || cache.window.rows() != steps) {
        throw DataError("lstm_backward: cache does not match a forward pass");
    }
    const auto h_dim = static_cast<Eigen::Index>(model.hidden_dim);

    Eigen::VectorXd h_out = cache.h.back().cwiseProduct(cache.dropout_mask);
    grads.head_w += loss_grad * h_out;
    grads.head_b += loss_grad;

    Eigen::VectorXd dh = (loss_grad * model.head_w).cwiseProduct(cache.dropout_mask);
    Eigen::VectorXd dc = Eigen::VectorXd::Zero(h_dim);

    for (Eigen::Index t = steps - 1; t >= 0; --t) {
        const Eigen::VectorXd& f = cache.f[static_cast<std::size_t>(t)];
        const Eigen::VectorXd& i = cache.i[static_cast<std::size_t>(t)];
        const Eigen::VectorXd& o = cache.o[static_cast<std::size_t>(t)];
        const Eigen::VectorXd& g = cache.g[static_cast<std::size_t>(t)];
        const Eigen::VectorXd& tc = cache.tanh_c[static_cast<std::size_t>(t)];
        Eigen::VectorXd c_prev = t > 0 ? cache.c[static_cast<std::size_t>(t - 1)]
                                       : Eigen::VectorXd::Zero(h_dim);
        Eigen::VectorXd h_prev = t > 0 ? cache.h[static_cast<std::size_t>(t - 1)]
                                       : Eigen::VectorXd::Zero(h_dim);
        Eigen::VectorXd x = cache.window.row(t).transpose();

        Eigen::VectorXd do_ = dh.cwiseProduct(tc);
        dc += dh.cwiseProduct(o).cwiseProduct(
            (1.0 - tc.array().square()).matrix());

        Eigen::VectorXd df = dc.cwiseProduct(c_prev);
        Eigen::VectorXd di = dc.cwiseProduct(g);
        Eigen::VectorXd dg = dc.cwiseProduct(i);

        Eigen::VectorXd dpre_f = df.cwiseProduct(f).cwiseProduct((1.0 - f.array()).matrix());
        Eigen::VectorXd dpre_i = di.cwiseProduct(i).cwiseProduct((1.0 - i.array()).matrix());
        Eigen::VectorXd dpre_o = do_.cwiseProduct(o).cwiseProduct((1.0 - o.array()).matrix());
        Eigen::VectorXd dpre_g = dg.cwiseProduct((1.0 - g.array().square()).matrix());

        grads.W_f += dpre_f * x.transpose();
        grads.W_i += dpre_i * x.transpose();
        grads.W_o += dpre_o * x.transpose();
        grads.W_c += dpre_g * x.transpose();
        grads.U_f += dpre_f * h_prev.transpose();
        grads.U_i += dpre_i * h_prev.transpose();
        grads.U_o += dpre_o * h_prev.transpose();
        grads.U_c += dpre_g * h_prev.transpose();
        grads.b_f += dpre_f;
        grads.b_i += dpre_i;
        grads.b_o += dpre_o;
        grads.b_c += dpre_g;

        dh = model.U_f.transpose() * dpre_f + model.U_i.transpose() * dpre_i +
             model.U_o.transpose() * dpre_o + model.U_c.transpose() * dpre_g;
        dc = dc.cwiseProduct(f);
    }
}

AdamState make_adam_state(LstmModel& model) {
    AdamState state;
    model.for_each_param([&](Eigen::Map<Eigen::VectorXd> p) {
        state.m.push_back(Eigen::VectorXd::Zero(p.size()));
        state.v.push_back(Eigen::VectorXd::Zero(p.size()));
    });
    return state;
}

void adam_step(LstmModel& model, LstmGradients& grads, AdamState& state, double lr_effective,
               const TrainConfig& config) {
    state.t += 1;
    double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));

    std::vector<Eigen::Map<Eigen::VectorXd>> params, gradients;
    model.for_each_param([&](Eigen::Map<Eigen::VectorXd> p) { params.push_back(p); });
    grads.for_each_param([&](Eigen::Map<Eigen::VectorXd> g) { gradients.push_back(g); });

    for (std::size_t b = 0; b < params.size(); ++b) {
        if (!gradients[b].allFinite()) {
            throw DataError("adam_step: non-finite gradient in parameter block " +
                            std::to_string(b));
        }
        Eigen::VectorXd& m = state.m[b];
        Eigen::VectorXd& v = state.v[b];
        m = config.beta1 * m + (1.0 - config.beta1) * gradients[b];
        v = config.beta2 * v + (1.0 - config.beta2) * gradients[b].cwiseProduct(gradients[b]);
        Eigen::VectorXd m_hat = m / bc1;
        Eigen::VectorXd v_hat = v / bc2;
        params[b] -= lr_effective *
                     m_hat.cwiseQuotient((v_hat.cwiseSqrt().array() + config.epsilon).matrix());
    }
}

SequenceSet build_sequences(const FeatureMatrix& matrix, const std::vector<double>& targets,
                            std::size_t window_len, bool pad) {
    if (window_len < 1) {
        throw DataError("build_sequences: window length must be >= 1");
    }
    if (targets.size() != matrix.rows) {
        throw DataError("build_sequences: target length does not match matrix rows");
    }

    // Group row indices per station; table order is already chronological.
    std::map<std::string, std::vector<std::size_t>> by_station;
    for (std::size_t r = 0; r < matrix.rows; ++r) {
        by_station[matrix.stations[r]].push_back(r);
    }

    SequenceSet set;
    set.window_len = window_len;
    const auto w = static_cast<Eigen::Index>(window_len);
    const auto d = static_cast<Eigen::Index>(matrix.cols);

    for (const auto& [station, rows] : by_station) {
        std::size_t first_end = pad ? 1 : window_len;
        for (std::size_t end = first_end; end <= rows.size(); ++end) {
            Sequence seq;
            seq.window = Eigen::MatrixXd(w, d);
            for (Eigen::Index t = 0; t < w; ++t) {
                // Left-pad short histories by repeating the earliest record.
                long src = static_cast<long>(end) - static_cast<long>(window_len) + t;
                std::size_t row = rows[static_cast<std::size_t>(std::max(src, 0L))];
                for (Eigen::Index col = 0; col < d; ++col) {
                    seq.window(t, col) = matrix.at(row, static_cast<std::size_t>(col));
                }
            }
            std::size_t last = rows[end - 1];
            seq.target = targets[last];
            seq.station = station;
            seq.date = matrix.dates[last];
            set.sequences.push_back(std::move(seq));
        }
    }
    std::stable_sort(set.sequences.begin(), set.sequences.end(),
                     [](const Sequence& a, const Sequence& b) {
                         if (a.date != b.date) return a.date < b.date;
                         return a.station < b.station;
                     });
    return set;
}

TrainResult train(LstmModel& model, const SequenceSet& sequences, const TrainConfig& config) {
    config.validate();
    if (sequences.sequences.empty()) {
        throw DataError("train: empty sequence set");
    }

    Rng rng(config.seed);
    AdamState adam = make_adam_state(model);
    LstmGradients grads;
    TrainResult result;

    std::vector<std::size_t> order(sequences.sequences.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        double lr = config.effective_lr(epoch);
        rng.shuffle(order);
        double epoch_sse = 0.0;

        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            std::size_t end = std::min(start + config.batch_size, order.size());
            auto batch_n = static_cast<double>(end - start);
            grads.setZero(model);
            for (std::size_t k = start; k < end; ++k) {
                const Sequence& seq = sequences.sequences[order[k]];
                LstmCache cache;
                double pred = lstm_forward(model, seq.window, /*dropout_active=*/true, rng,
                                           &cache);
                double err = pred - seq.target;
                epoch_sse += err * err;
                lstm_backward(model, cache, 2.0 * err / batch_n, grads);
            }
            if (!std::isfinite(epoch_sse)) {
                throw DivergenceError("train: non-finite loss at epoch " +
                                      std::to_string(epoch) + ", step " +
                                      std::to_string(start / config.batch_size));
            }
            adam_step(model, grads, adam, lr, config);
        }
        result.epoch_loss.push_back(epoch_sse / static_cast<double>(order.size()));
    }
    return result;
}

std::vector<double> predict(const LstmModel& model, const SequenceSet& sequences) {
    Rng rng(0);  // unused: dropout is off
    std::vector<double> out;
    out.reserve(sequences.sequences.size());
    for (const auto& seq : sequences.sequences) {
        out.push_back(lstm_forward(model, seq.window, /*dropout_active=*/false, rng));
    }
    return out;
}

namespace {
double safe_std(double s) { return s < 1e-12 ? 1.0 : s; }
}  // namespace

void fit_normalization(const FeatureMatrix& matrix, const std::vector<double>& target,
                       TrainConfig& config) {
    config.feature_mean.assign(matrix.cols, 0.0);
    config.feature_std.assign(matrix.cols, 0.0);
    auto n = static_cast<double>(matrix.rows);
    for (std::size_t c = 0; c < matrix.cols; ++c) {
        double s = 0.0;
        for (std::size_t r = 0; r < matrix.rows; ++r) s += matrix.at(r, c);
        double mean = s / n;
        double var = 0.0;
        for (std::size_t r = 0; r < matrix.rows; ++r) {
            double d = matrix.at(r, c) - mean;
            var += d * d;
        }
        config.feature_mean[c] = mean;
        config.feature_std[c] = safe_std(std::sqrt(var / n));
    }
    double s = 0.0;
    for (double v : target) s += v;
    config.target_mean = s / static_cast<double>(target.size());
    double var = 0.0;
    for (double v : target) {
        double d = v - config.target_mean;
        var += d * d;
    }
    config.target_std = safe_std(std::sqrt(var / static_cast<double>(target.size())));
}

FeatureMatrix apply_feature_normalization(const FeatureMatrix& matrix,
                                          const TrainConfig& config) {
    if (config.feature_mean.size() != matrix.cols) {
        throw ConfigError("apply_feature_normalization: stats do not match matrix");
    }
    FeatureMatrix out = matrix;
    for (std::size_t r = 0; r < out.rows; ++r) {
        for (std::size_t c = 0; c < out.cols; ++c) {
            out.values[r * out.cols + c] =
                (matrix.at(r, c) - config.feature_mean[c]) / config.feature_std[c];
        }
    }
    return out;
}

std::vector<double> normalize_targets(const std::vector<double>& raw, const TrainConfig& config) {
    std::vector<double> out;
    out.reserve(raw.size());
    for (double v : raw) out.push_back((v - config.target_mean) / config.target_std);
    return out;
}

std::vector<double> denormalize_targets(const std::vector<double>& normed,
                                        const TrainConfig& config) {
    std::vector<double> out;
    out.reserve(normed.size());
    for (double v : normed) out.push_back(v * config.target_std + config.target_mean);
    return out;
}

std::string serialize_model(const LstmModel& model, const TrainConfig& config,
                            const std::vector<std::string>& feature_names) {
    nlohmann::ordered_json manifest;
    manifest["input_dim"] = model.input_dim;
    manifest["hidden_dim"] = model.hidden_dim;
    manifest["dropout_rate"] = model.dropout_rate;
    manifest["rng_seed"] = model.rng_seed;
    manifest["feature_names"] = feature_names;
    manifest["config"] = {
        {"learning_rate", config.learning_rate},
        {"decay_rate", config.decay_rate},
        {"beta1", config.beta1},
        {"beta2", config.beta2},
        {"epsilon", config.epsilon},
        {"epochs", config.epochs},
        {"batch_size", config.batch_size},
        {"window", config.window},
        {"dropout_rate", config.dropout_rate},
        {"hidden_dim", config.hidden_dim},
        {"pad_windows", config.pad_windows},
        {"seed", config.seed},
    };
    manifest["normalization"] = {
        {"feature_mean", config.feature_mean},
        {"feature_std", config.feature_std},
        {"target_mean", config.target_mean},
        {"target_std", config.target_std},
    };

    std::string out = kSnapshotHeader;
    out += '\n';
    out += manifest.dump();
    out += '\n';
    // Parameter blocks in for_each_param order, little-endian f64.
    LstmModel& mutable_model = const_cast<LstmModel&>(model);
    mutable_model.for_each_param([&](Eigen::Map<Eigen::VectorXd> p) {
        out.append(reinterpret_cast<const char*>(p.data()),
                   static_cast<std::size_t>(p.size()) * sizeof(double));
    });
    return out;
}

ModelSnapshot parse_model(const std::string& bytes, const std::string& origin) {
    auto first_nl = bytes.find('\n');
    if (first_nl == std::string::npos || bytes.substr(0, first_nl) != kSnapshotHeader) {
        throw DataError(origin + ": not an " + std::string(kSnapshotHeader) + " snapshot");
    }
    auto second_nl = bytes.find('\n', first_nl + 1);
    if (second_nl == std::string::npos) {
        throw DataError(origin + ": truncated snapshot manifest");
    }
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(bytes.substr(first_nl + 1, second_nl - first_nl - 1));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(origin + ": bad snapshot manifest: " + e.what());
    }

    ModelSnapshot snap;
    const auto& cfg = manifest.at("config");
    snap.config.learning_rate = cfg.at("learning_rate").get<double>();
    snap.config.decay_rate = cfg.at("decay_rate").get<double>();
    snap.config.beta1 = cfg.at("beta1").get<double>();
    snap.config.beta2 = cfg.at("beta2").get<double>();
    snap.config.epsilon = cfg.at("epsilon").get<double>();
    snap.config.epochs = cfg.at("epochs").get<std::size_t>();
    snap.config.batch_size = cfg.at("batch_size").get<std::size_t>();
    snap.config.window = cfg.at("window").get<std::size_t>();
    snap.config.dropout_rate = cfg.at("dropout_rate").get<double>();
    snap.config.hidden_dim = cfg.at("hidden_dim").get<std::size_t>();
    snap.config.pad_windows = cfg.at("pad_windows").get<bool>();
    snap.config.seed = cfg.at("seed").get<std::uint64_t>();
    const auto& norm = manifest.at("normalization");
    snap.config.feature_mean = norm.at("feature_mean").get<std::vector<double>>();
    snap.config.feature_std = norm.at("feature_std").get<std::vector<double>>();
    snap.config.target_mean = norm.at("target_mean").get<double>();
    snap.config.target_std = norm.at("target_std").get<double>();
    snap.feature_names = manifest.at("feature_names").get<std::vector<std::string>>();

    snap.model = make_lstm(manifest.at("input_dim").get<std::size_t>(),
                           manifest.at("hidden_dim").get<std::size_t>(),
                           manifest.at("dropout_rate").get<double>(),
                           manifest.at("rng_seed").get<std::uint64_t>());

    std::size_t expected = snap.model.param_count() * sizeof(double);
    if (bytes.size() - second_nl - 1 != expected) {
        throw DataError(origin + ": snapshot weight payload size mismatch");
    }
    const char* p = bytes.data() + second_nl + 1;
    snap.model.for_each_param([&](Eigen::Map<Eigen::VectorXd> param) {
        std::memcpy(param.data(), p, static_cast<std::size_t>(param.size()) * sizeof(double));
        p += static_cast<std::size_t>(param.size()) * sizeof(double);
    });
    return snap;
}

void save_model(const LstmModel& model, const TrainConfig& config,
                const std::vector<std::string>& feature_names,
                const std::filesystem::path& path) {
    atomic_write_file(path, serialize_model(model, config, feature_names));
}

ModelSnapshot load_model(const std::filesystem::path& path) {
    return parse_model(read_file(path), path.string());
}

}  // namespace aqua
