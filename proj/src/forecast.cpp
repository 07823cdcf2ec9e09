#include "gridiv/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

namespace gridiv {

using json = nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

Vector raw_input(const ForecastModel& m, double v_real, double v_imag, const Vector& u_slice) {
    if (u_slice.size() != m.feature_count())
        throw MissingFeature("model '" + m.id + "' expects " +
                             std::to_string(m.feature_count()) + " features, got " +
                             std::to_string(u_slice.size()));
    Vector x(2 + u_slice.size());
    x[0] = v_real;
    x[1] = v_imag;
    std::copy(u_slice.begin(), u_slice.end(), x.begin() + 2);
    return x;
}

Vector slice_from(const ForecastModel& m, const ExogenousVector& u) {
    Vector out;
    out.reserve(m.input_spec.size());
    for (const std::string& name : m.input_spec) {
        if (!u.has(name))
            throw MissingFeature("model '" + m.id + "' needs feature '" + name + "'");
        out.push_back(u.get(name));
    }
    return out;
}

struct ForwardTrace {
    std::vector<Vector> activations;      // activations[0] = normalized input
    std::vector<Vector> preactivations;   // z per affine layer
};

Vector normalized(const ForecastModel& m, const Vector& x) {
    Vector xn(x.size());
    for (std::size_t k = 0; k < x.size(); ++k)
        xn[k] = (x[k] - m.norm_center[k]) * m.norm_scale[k];
    return xn;
}

ForwardTrace run_forward(const ForecastModel& m, const Vector& x) {
    ForwardTrace t;
    t.activations.push_back(normalized(m, x));
    const std::size_t n_layers = m.weights.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        const DenseMatrix& w = m.weights[l];
        const Vector& prev = t.activations.back();
        Vector z = w.apply(prev);
        for (std::size_t j = 0; j < z.size(); ++j) z[j] += m.biases[l][j];
        t.preactivations.push_back(z);
        if (l + 1 < n_layers) {
            Vector a(z.size());
            for (std::size_t j = 0; j < z.size(); ++j) a[j] = std::tanh(z[j]);
            t.activations.push_back(std::move(a));
        } else {
            t.activations.push_back(z);
        }
    }
    return t.activations.back();
}

}  // namespace

// -- model structure -----------------------------------------------------------

void ForecastModel::validate() const {
    if (layer_dims.size() < 2)
        throw ShapeMismatch("model '" + id + "': needs at least input and output dims");
    if (layer_dims.back() != 2)
        throw ShapeMismatch("model '" + id + "': output dimension must be 2, got " +
                            std::to_string(layer_dims.back()));
    if (layer_dims.front() != 2 + input_spec.size())
        throw ShapeMismatch("model '" + id + "': input dim " +
                            std::to_string(layer_dims.front()) + " != 2 + " +
                            std::to_string(input_spec.size()) + " features");
    if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size())
        throw ShapeMismatch("model '" + id + "': layer count mismatch");
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != layer_dims[l + 1] || weights[l].cols() != layer_dims[l])
            throw ShapeMismatch("model '" + id + "': weight " + std::to_string(l) + " is " +
                                std::to_string(weights[l].rows()) + "x" +
                                std::to_string(weights[l].cols()) + ", expected " +
                                std::to_string(layer_dims[l + 1]) + "x" +
                                std::to_string(layer_dims[l]));
        if (biases[l].size() != layer_dims[l + 1])
            throw ShapeMismatch("model '" + id + "': bias " + std::to_string(l) +
                                " has wrong length");
        if (!weights[l].all_finite())
            throw ValidationError("model '" + id + "': non-finite weight in layer " +
                                  std::to_string(l));
        for (double b : biases[l])
            if (!std::isfinite(b))
                throw ValidationError("model '" + id + "': non-finite bias in layer " +
                                      std::to_string(l));
    }
    if (norm_center.size() != layer_dims.front() || norm_scale.size() != layer_dims.front())
        throw ShapeMismatch("model '" + id + "': normalization length mismatch");
    if (activation != "tanh")
        throw ShapeMismatch("model '" + id + "': unsupported activation '" + activation + "'");
}

ForecastModel ForecastModel::create(std::string id, std::vector<std::string> input_spec,
                                    std::vector<std::size_t> hidden_dims, std::uint64_t seed) {
    ForecastModel m = zeros(std::move(id), std::move(input_spec), std::move(hidden_dims));
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        const double bound =
            std::sqrt(6.0 / double(m.layer_dims[l] + m.layer_dims[l + 1]));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& w : m.weights[l].data()) w = dist(rng);
    }
    return m;
}

ForecastModel ForecastModel::zeros(std::string id, std::vector<std::string> input_spec,
                                   std::vector<std::size_t> hidden_dims) {
    ForecastModel m;
    m.id = std::move(id);
    m.input_spec = std::move(input_spec);
    m.layer_dims.push_back(2 + m.input_spec.size());
    for (std::size_t h : hidden_dims) m.layer_dims.push_back(h);
    m.layer_dims.push_back(2);
    for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
        m.weights.emplace_back(m.layer_dims[l + 1], m.layer_dims[l], 0.0);
        m.biases.emplace_back(m.layer_dims[l + 1], 0.0);
    }
    m.norm_center.assign(m.layer_dims.front(), 0.0);
    m.norm_scale.assign(m.layer_dims.front(), 1.0);
    return m;
}

// -- evaluation -----------------------------------------------------------------

CurrentPair forward(const ForecastModel& m, double v_real, double v_imag,
                    const Vector& u_slice) {
    const Vector y = run_forward(m, raw_input(m, v_real, v_imag, u_slice));
    return {y[0], y[1]};
}

CurrentPair forward(const ForecastModel& m, double v_real, double v_imag,
                    const ExogenousVector& u) {
    return forward(m, v_real, v_imag, slice_from(m, u));
}

DenseMatrix backward(const ForecastModel& m, double v_real, double v_imag,
                     const Vector& u_slice) {
    const Vector x = raw_input(m, v_real, v_imag, u_slice);
    ForwardTrace t;
    t.activations.push_back(normalized(m, x));
    const std::size_t n_layers = m.weights.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Vector z = m.weights[l].apply(t.activations.back());
        for (std::size_t j = 0; j < z.size(); ++j) z[j] += m.biases[l][j];
        t.preactivations.push_back(z);
        if (l + 1 < n_layers) {
            Vector a(z.size());
            for (std::size_t j = 0; j < z.size(); ++j) a[j] = std::tanh(z[j]);
            t.activations.push_back(std::move(a));
        } else {
            t.activations.push_back(std::move(z));
        }
    }

    const std::size_t d = m.input_dim();
    DenseMatrix grads(2, d, 0.0);
    for (std::size_t out = 0; out < 2; ++out) {
        // seed at the output layer, walk adjoints back to the input
        Vector g(2, 0.0);
        g[out] = 1.0;
        for (std::size_t l = n_layers; l-- > 0;) {
            if (l + 1 < n_layers) {
                const Vector& a = t.activations[l + 1];
                for (std::size_t j = 0; j < g.size(); ++j) g[j] *= 1.0 - a[j] * a[j];
            }
            g = m.weights[l].apply_transpose(g);
        }
        for (std::size_t k = 0; k < d; ++k) grads(out, k) = g[k] * m.norm_scale[k];
    }
    return grads;
}

DenseMatrix backward(const ForecastModel& m, double v_real, double v_imag,
                     const ExogenousVector& u) {
    return backward(m, v_real, v_imag, slice_from(m, u));
}

ModelHessian hessian(const ForecastModel& m, double v_real, double v_imag,
                     const Vector& u_slice) {
    const Vector x = raw_input(m, v_real, v_imag, u_slice);
    const std::size_t d = m.input_dim();

    // forward propagation of per-neuron Jacobians and Hessians w.r.t. raw inputs
    DenseMatrix jac(d, d, 0.0);
    std::vector<DenseMatrix> hess(d, DenseMatrix(d, d, 0.0));
    for (std::size_t k = 0; k < d; ++k) jac(k, k) = m.norm_scale[k];
    Vector a = normalized(m, x);

    const std::size_t n_layers = m.weights.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        const DenseMatrix& w = m.weights[l];
        const std::size_t n_out = w.rows();

        Vector z = w.apply(a);
        for (std::size_t j = 0; j < n_out; ++j) z[j] += m.biases[l][j];

        DenseMatrix jz(n_out, d, 0.0);
        std::vector<DenseMatrix> hz(n_out, DenseMatrix(d, d, 0.0));
        for (std::size_t j = 0; j < n_out; ++j) {
            for (std::size_t mcol = 0; mcol < w.cols(); ++mcol) {
                const double wjm = w(j, mcol);
                if (wjm == 0.0) continue;
                for (std::size_t k = 0; k < d; ++k) jz(j, k) += wjm * jac(mcol, k);
                const DenseMatrix& hm = hess[mcol];
                for (std::size_t p = 0; p < d; ++p)
                    for (std::size_t q = 0; q < d; ++q) hz[j](p, q) += wjm * hm(p, q);
            }
        }

        if (l + 1 < n_layers) {
            Vector an(n_out);
            for (std::size_t j = 0; j < n_out; ++j) {
                const double tval = std::tanh(z[j]);
                const double s1 = 1.0 - tval * tval;      // tanh'
                const double s2 = -2.0 * tval * s1;       // tanh''
                an[j] = tval;
                for (std::size_t p = 0; p < d; ++p)
                    for (std::size_t q = 0; q < d; ++q)
                        hz[j](p, q) = s2 * jz(j, p) * jz(j, q) + s1 * hz[j](p, q);
                for (std::size_t k = 0; k < d; ++k) jz(j, k) *= s1;
            }
            a = std::move(an);
        } else {
            a = std::move(z);
        }
        jac = std::move(jz);
        hess = std::move(hz);
    }

    return ModelHessian{hess[0], hess[1]};
}

ModelHessian hessian(const ForecastModel& m, double v_real, double v_imag,
                     const ExogenousVector& u) {
    return hessian(m, v_real, v_imag, slice_from(m, u));
}

// -- training ---------------------------------------------------------------------

namespace {

struct WeightGrads {
    std::vector<DenseMatrix> w;
    std::vector<Vector> b;

    explicit WeightGrads(const ForecastModel& m) {
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            w.emplace_back(m.weights[l].rows(), m.weights[l].cols(), 0.0);
            b.emplace_back(m.biases[l].size(), 0.0);
        }
    }

    void zero() {
        for (auto& wm : w) std::fill(wm.data().begin(), wm.data().end(), 0.0);
        for (auto& bv : b) std::fill(bv.begin(), bv.end(), 0.0);
    }
};

// accumulates d(sum of squared errors)/d(weights) for one sample
void accumulate_sample_grads(const ForecastModel& m, const TrainingSample& s,
                             WeightGrads& grads, double* sq_error) {
    const Vector x = raw_input(m, s.v_real, s.v_imag, s.u);
    ForwardTrace t;
    t.activations.push_back(normalized(m, x));
    const std::size_t n_layers = m.weights.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
        Vector z = m.weights[l].apply(t.activations.back());
        for (std::size_t j = 0; j < z.size(); ++j) z[j] += m.biases[l][j];
        t.preactivations.push_back(z);
        if (l + 1 < n_layers) {
            Vector a(z.size());
            for (std::size_t j = 0; j < z.size(); ++j) a[j] = std::tanh(z[j]);
            t.activations.push_back(std::move(a));
        } else {
            t.activations.push_back(std::move(z));
        }
    }

    const Vector& y = t.activations.back();
    const double er = y[0] - s.y_real;
    const double ei = y[1] - s.y_imag;
    *sq_error += er * er + ei * ei;

    Vector g = {2.0 * er, 2.0 * ei};
    for (std::size_t l = n_layers; l-- > 0;) {
        if (l + 1 < n_layers) {
            const Vector& a = t.activations[l + 1];
            for (std::size_t j = 0; j < g.size(); ++j) g[j] *= 1.0 - a[j] * a[j];
        }
        const Vector& prev = t.activations[l];
        for (std::size_t j = 0; j < g.size(); ++j) {
            grads.b[l][j] += g[j];
            for (std::size_t k = 0; k < prev.size(); ++k) grads.w[l](j, k) += g[j] * prev[k];
        }
        g = m.weights[l].apply_transpose(g);
    }
}

void fit_normalization(ForecastModel& m, const TrainingSet& data) {
    const std::size_t d = m.input_dim();
    Vector lo(d, std::numeric_limits<double>::infinity());
    Vector hi(d, -std::numeric_limits<double>::infinity());
    for (const TrainingSample& s : data.samples) {
        const Vector x = raw_input(m, s.v_real, s.v_imag, s.u);
        for (std::size_t k = 0; k < d; ++k) {
            lo[k] = std::min(lo[k], x[k]);
            hi[k] = std::max(hi[k], x[k]);
        }
    }
    for (std::size_t k = 0; k < d; ++k) {
        const double center = 0.5 * (lo[k] + hi[k]);
        const double half = 0.5 * (hi[k] - lo[k]);
        m.norm_center[k] = center;
        m.norm_scale[k] = half > 1e-12 ? 1.0 / half : 1.0;
    }
}

}  // namespace

double evaluate_mse(const ForecastModel& m, const TrainingSet& data) {
    double acc = 0.0;
    for (const TrainingSample& s : data.samples) {
        const CurrentPair p = forward(m, s.v_real, s.v_imag, s.u);
        const double er = p.real - s.y_real;
        const double ei = p.imag - s.y_imag;
        acc += er * er + ei * ei;
    }
    return acc / double(data.samples.size());
}

TrainResult train(const ForecastModel& m0, const TrainingSet& data, const TrainConfig& cfg) {
    if (data.samples.empty()) throw ValidationError("train: empty training set");
    if (!(cfg.learning_rate > 0.0)) throw ValidationError("train: learning_rate must be > 0");
    if (cfg.epochs < 1) throw ValidationError("train: epochs must be >= 1");

    ForecastModel m = m0;
    m.validate();
    if (data.feature_names.size() != m.feature_count())
        throw MissingFeature("train: dataset has " + std::to_string(data.feature_names.size()) +
                             " features, model expects " + std::to_string(m.feature_count()));

    // only fit normalization on a fresh (identity-normalized) model, so a
    // warm start at a trained model is an exact fixed point of the loss
    const bool identity_norm =
        std::all_of(m.norm_center.begin(), m.norm_center.end(),
                    [](double c) { return c == 0.0; }) &&
        std::all_of(m.norm_scale.begin(), m.norm_scale.end(),
                    [](double s) { return s == 1.0; });
    if (identity_norm && data.samples.size() > 1) fit_normalization(m, data);

    const std::size_t n = data.samples.size();
    const std::size_t batch =
        (cfg.batch_size == 0 || cfg.batch_size >= n) ? n : cfg.batch_size;

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    WeightGrads grads(m);
    WeightGrads velocity(m);

    TrainResult result;
    result.loss_history.push_back(evaluate_mse(m, data));

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (batch < n) std::shuffle(order.begin(), order.end(), rng);
        double epoch_sq = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(start + batch, n);
            grads.zero();
            double batch_sq = 0.0;
            for (std::size_t idx = start; idx < stop; ++idx)
                accumulate_sample_grads(m, data.samples[order[idx]], grads, &batch_sq);
            epoch_sq += batch_sq;

            const double inv = 1.0 / double(stop - start);
            for (std::size_t l = 0; l < m.weights.size(); ++l) {
                auto& wv = velocity.w[l].data();
                auto& wg = grads.w[l].data();
                auto& wm = m.weights[l].data();
                for (std::size_t k = 0; k < wm.size(); ++k) {
                    const double g = wg[k] * inv + 2.0 * cfg.l2_penalty * wm[k];
                    wv[k] = cfg.momentum * wv[k] - cfg.learning_rate * g;
                    wm[k] += wv[k];
                }
                for (std::size_t k = 0; k < m.biases[l].size(); ++k) {
                    const double g = grads.b[l][k] * inv;
                    velocity.b[l][k] = cfg.momentum * velocity.b[l][k] - cfg.learning_rate * g;
                    m.biases[l][k] += velocity.b[l][k];
                }
            }
        }
        const double epoch_mse = epoch_sq / double(n);
        if (!std::isfinite(epoch_mse))
            throw DivergedTraining("train: loss became non-finite at epoch " +
                                   std::to_string(epoch));
        result.loss_history.push_back(epoch_mse);
    }

    if (!std::isfinite(result.loss_history.back()))
        throw DivergedTraining("train: final loss non-finite");
    result.model = std::move(m);
    return result;
}

// -- synthetic data ------------------------------------------------------------------

double GroundTruthSpec::response_scale(const std::vector<std::string>& names,
                                       const Vector& values) const {
    double temp = t_ref;
    double irr = 0.0;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == temperature_feature) temp = values[i];
        if (names[i] == irradiance_feature) irr = values[i];
    }
    return (1.0 + alpha_temperature * (temp - t_ref)) * (1.0 - alpha_irradiance * irr / 1000.0);
}

PhysicsDevice GroundTruthSpec::scaled_device(const std::vector<std::string>& names,
                                             const Vector& values) const {
    const double scale = response_scale(names, values);
    PhysicsDevice d = device;
    if (auto* pq = std::get_if<PQLoad>(&d.model)) {
        pq->p *= scale;
        pq->q *= scale;
    } else if (auto* zip = std::get_if<ZipLoad>(&d.model)) {
        zip->p0 *= scale;
        zip->q0 *= scale;
    } else if (auto* pv = std::get_if<PVGenerator>(&d.model)) {
        pv->p *= scale;
    }
    return d;
}

TrainingSet generate_training_data(const GroundTruthSpec& truth,
                                   std::pair<double, double> v_range,
                                   const std::vector<FeatureRange>& u_ranges, std::size_t n,
                                   std::uint64_t seed) {
    if (!(v_range.first > 0.0) || v_range.second > 2.0 || v_range.second < v_range.first)
        throw ValidationError("generate_training_data: v_range must be within (0, 2] and ordered");
    if (n < 1) throw ValidationError("generate_training_data: n must be >= 1");

    TrainingSet set;
    for (const FeatureRange& r : u_ranges) {
        if (r.hi < r.lo)
            throw ValidationError("generate_training_data: inverted range for '" + r.name + "'");
        set.feature_names.push_back(r.name);
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> mag_dist(v_range.first, v_range.second);
    std::uniform_real_distribution<double> ang_dist(-15.0 * kPi / 180.0, 15.0 * kPi / 180.0);

    for (std::size_t i = 0; i < n; ++i) {
        TrainingSample s;
        const double mag = mag_dist(rng);
        const double ang = ang_dist(rng);
        s.v_real = mag * std::cos(ang);
        s.v_imag = mag * std::sin(ang);
        for (const FeatureRange& r : u_ranges) {
            std::uniform_real_distribution<double> dist(r.lo, r.hi);
            s.u.push_back(r.lo == r.hi ? r.lo : dist(rng));
        }
        const PhysicsDevice dev = truth.scaled_device(set.feature_names, s.u);
        const CurrentPair c = device_current(dev, s.v_real, s.v_imag);
        s.y_real = c.real;
        s.y_imag = c.imag;
        set.samples.push_back(std::move(s));
    }
    return set;
}

// -- persistence -------------------------------------------------------------------

std::string save_model(const ForecastModel& m) {
    json doc;
    doc["id"] = m.id;
    doc["layer_dims"] = m.layer_dims;
    doc["activation"] = m.activation;
    doc["input_spec"] = m.input_spec;
    doc["normalization"] = {{"center", m.norm_center}, {"scale", m.norm_scale}};
    doc["weights"] = json::array();
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        json layer;
        layer["b"] = m.biases[l];
        json rows = json::array();
        for (std::size_t i = 0; i < m.weights[l].rows(); ++i) {
            json row = json::array();
            for (std::size_t j = 0; j < m.weights[l].cols(); ++j)
                row.push_back(m.weights[l](i, j));
            rows.push_back(std::move(row));
        }
        layer["w"] = std::move(rows);
        doc["weights"].push_back(std::move(layer));
    }
    return doc.dump(2) + "\n";
}

ForecastModel load_model(const std::string& document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError("model document: " + std::string(e.what()));
    }
    ForecastModel m;
    try {
        m.id = doc.at("id").get<std::string>();
        m.layer_dims = doc.at("layer_dims").get<std::vector<std::size_t>>();
        m.activation = doc.value("activation", "tanh");
        m.input_spec = doc.at("input_spec").get<std::vector<std::string>>();
        m.norm_center = doc.at("normalization").at("center").get<Vector>();
        m.norm_scale = doc.at("normalization").at("scale").get<Vector>();
        for (const json& layer : doc.at("weights")) {
            const json& rows = layer.at("w");
            const std::size_t r = rows.size();
            const std::size_t c = r > 0 ? rows[0].size() : 0;
            DenseMatrix w(r, c, 0.0);
            for (std::size_t i = 0; i < r; ++i) {
                if (rows[i].size() != c)
                    throw ShapeMismatch("model document: ragged weight matrix");
                for (std::size_t j = 0; j < c; ++j) w(i, j) = rows[i][j].get<double>();
            }
            m.weights.push_back(std::move(w));
            m.biases.push_back(layer.at("b").get<Vector>());
        }
    } catch (const json::exception& e) {
        throw ParseError("model document: " + std::string(e.what()));
    }
    m.validate();
    return m;
}

std::string save_training_set(const TrainingSet& data) {
    json doc;
    doc["feature_names"] = data.feature_names;
    json samples = json::array();
    for (const TrainingSample& s : data.samples)
        samples.push_back({{"v_real", s.v_real},
                           {"v_imag", s.v_imag},
                           {"u", s.u},
                           {"y_real", s.y_real},
                           {"y_imag", s.y_imag}});
    doc["samples"] = std::move(samples);
    return doc.dump(2) + "\n";
}

TrainingSet load_training_set(const std::string& document) {
    json doc;
    try {
        doc = json::parse(document);
    } catch (const json::parse_error& e) {
        throw ParseError("training set document: " + std::string(e.what()));
    }
    TrainingSet set;
    try {
        set.feature_names = doc.at("feature_names").get<std::vector<std::string>>();
        for (const json& js : doc.at("samples")) {
            TrainingSample s;
            s.v_real = js.at("v_real").get<double>();
            s.v_imag = js.at("v_imag").get<double>();
            s.u = js.at("u").get<Vector>();
            s.y_real = js.at("y_real").get<double>();
            s.y_imag = js.at("y_imag").get<double>();
            set.samples.push_back(std::move(s));
        }
    } catch (const json::exception& e) {
        throw ParseError("training set document: " + std::string(e.what()));
    }
    if (set.samples.empty()) throw ValidationError("training set document: no samples");
    return set;
}

}  // namespace gridiv
