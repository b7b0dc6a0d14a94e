#include "srfilter/nnet.hpp"

#include "srfilter/error.hpp"
#include "srfilter/io.hpp"
#include "srfilter/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace srfilter {

void MLPSpec::validate() const
{
    if (layer_sizes.size() < 3)
        throw SpecError("mlp spec: need input, at least one hidden layer and output");
    if (layer_sizes.back() != 1)
        throw SpecError("mlp spec: last layer size must be 1");
    for (auto s : layer_sizes)
        if (s == 0)
            throw SpecError("mlp spec: layer sizes must be positive");
}

MLPSpec MLPSpec::with_hidden(std::size_t input_dim, const std::vector<std::size_t>& hidden)
{
    MLPSpec spec;
    spec.layer_sizes.push_back(input_dim);
    spec.layer_sizes.insert(spec.layer_sizes.end(), hidden.begin(), hidden.end());
    spec.layer_sizes.push_back(1);
    spec.validate();
    return spec;
}

bool MLPParams::all_finite() const
{
    return std::all_of(layers.begin(), layers.end(),
                       [](const DenseLayer& l) { return l.weights.allFinite() && l.bias.allFinite(); });
}

void TrainConfig::validate() const
{
    if (!(learning_rate > 0.0))
        throw SpecError("train config: learning_rate must be positive");
    if (batch_size == 0 || max_epochs == 0 || patience == 0)
        throw SpecError("train config: batch_size, max_epochs and patience must be positive");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
        throw SpecError("train config: validation_fraction must lie in (0, 1)");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon_stability > 0.0))
        throw SpecError("train config: invalid moment decay or stability constant");
}

MLPParams init_params(const MLPSpec& spec, std::uint64_t seed)
{
    spec.validate();
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    MLPParams p{spec, {}};
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const auto in = static_cast<Eigen::Index>(spec.layer_sizes[l]);
        const auto out = static_cast<Eigen::Index>(spec.layer_sizes[l + 1]);
        const double sd = std::sqrt(2.0 / static_cast<double>(in));
        DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
        for (Eigen::Index r = 0; r < out; ++r)
            for (Eigen::Index c = 0; c < in; ++c)
                layer.weights(r, c) = sd * normal(rng);
        p.layers.push_back(std::move(layer));
    }
    return p;
}

namespace {

double sigmoid(double z)
{
    if (z >= 0.0)
        return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z)
{
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// BCE of one sample from its logit, with p clamped to [c, 1 - c].
double bce_from_logit(double z, double y)
{
    static const double log_lo = std::log(kLossClamp);
    static const double log_hi = std::log1p(-kLossClamp);
    double log_p = std::clamp(-softplus(-z), log_lo, log_hi);
    double log_q = std::clamp(-softplus(z), log_lo, log_hi);
    return -(y * log_p + (1.0 - y) * log_q);
}

void check_input_dim(const MLPParams& params, std::size_t got)
{
    if (got != params.spec.input_dim())
        throw DimensionError("mlp: input dimension " + std::to_string(got) + " does not match input layer " +
                             std::to_string(params.spec.input_dim()));
}

// Workspace for batched forward/backward passes (column = sample).
struct Workspace {
    std::vector<Eigen::MatrixXd> pre;  // pre-activations per layer
    std::vector<Eigen::MatrixXd> act;  // act[0] = input, act[l] = relu(pre[l-1])
    Eigen::MatrixXd delta;
    Eigen::MatrixXd delta_prev;

    explicit Workspace(std::size_t layers) : pre(layers), act(layers) {}
};

// Runs the forward pass on ws.act[0] and leaves logits in ws.pre.back().
void forward_batch(const MLPParams& p, Workspace& ws)
{
    const std::size_t L = p.layers.size();
    for (std::size_t l = 0; l < L; ++l) {
        const auto& layer = p.layers[l];
        ws.pre[l].noalias() = layer.weights * ws.act[l];
        ws.pre[l].colwise() += layer.bias;
        if (l + 1 < L)
            ws.act[l + 1] = ws.pre[l].cwiseMax(0.0);
    }
}

// Backward pass given dL/dlogit in ws.delta (1 x B); accumulates into grads.
void backward_batch(const MLPParams& p, Workspace& ws, std::vector<DenseLayer>& grads)
{
    for (std::size_t l = p.layers.size(); l-- > 0;) {
        grads[l].weights.noalias() = ws.delta * ws.act[l].transpose();
        grads[l].bias = ws.delta.rowwise().sum();
        if (l == 0)
            break;
        ws.delta_prev.noalias() = p.layers[l].weights.transpose() * ws.delta;
        ws.delta = ws.delta_prev.cwiseProduct((ws.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
}

std::vector<DenseLayer> zeros_like(const MLPParams& p)
{
    std::vector<DenseLayer> g;
    for (const auto& l : p.layers)
        g.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    return g;
}

// Loss and gradient of the batch already loaded into ws.act[0].
double loss_grad_loaded(const MLPParams& p, Workspace& ws, const Eigen::VectorXd& y, std::vector<DenseLayer>& grads)
{
    forward_batch(p, ws);
    const auto& logits = ws.pre.back();
    const auto B = logits.cols();
    ws.delta.resize(1, B);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < B; ++i) {
        double z = logits(0, i);
        loss += bce_from_logit(z, y(i));
        ws.delta(0, i) = (sigmoid(z) - y(i)) / static_cast<double>(B);
    }
    backward_batch(p, ws, grads);
    return loss / static_cast<double>(B);
}

double mean_loss(const MLPParams& p, const Matrix& x, const Eigen::VectorXd& y)
{
    Eigen::VectorXd logits = predict_logit(p, x);
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        total += bce_from_logit(logits(i), y(i));
    return total / static_cast<double>(logits.size());
}

} // namespace

ForwardTrace forward_trace(const MLPParams& params, std::span<const double> x)
{
    check_input_dim(params, x.size());
    ForwardTrace t;
    Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    t.activations.push_back(a);
    const std::size_t L = params.layers.size();
    for (std::size_t l = 0; l < L; ++l) {
        Eigen::VectorXd z = params.layers[l].weights * a + params.layers[l].bias;
        if (l + 1 < L) {
            a = z.cwiseMax(0.0);
            t.activations.push_back(a);
        } else {
            t.logit = z(0);
        }
    }
    t.probability = sigmoid(t.logit);
    return t;
}

double forward(const MLPParams& params, std::span<const double> x)
{
    return forward_trace(params, x).probability;
}

namespace {

constexpr Eigen::Index kEvalChunk = 4096;

template <typename Sink>
void evaluate_chunks(const MLPParams& params, const Matrix& x, Sink&& sink)
{
    check_input_dim(params, static_cast<std::size_t>(x.cols()));
    Workspace ws(params.layers.size());
    for (Eigen::Index start = 0; start < x.rows(); start += kEvalChunk) {
        const auto len = std::min(kEvalChunk, x.rows() - start);
        ws.act[0] = x.middleRows(start, len).transpose();
        forward_batch(params, ws);
        sink(start, len, ws);
    }
}

} // namespace

Eigen::VectorXd predict_logit(const MLPParams& params, const Matrix& x)
{
    Eigen::VectorXd out(x.rows());
    evaluate_chunks(params, x, [&](Eigen::Index start, Eigen::Index len, const Workspace& ws) {
        out.segment(start, len) = ws.pre.back().row(0).transpose();
    });
    return out;
}

Eigen::VectorXd predict(const MLPParams& params, const Matrix& x)
{
    Eigen::VectorXd z = predict_logit(params, x);
    for (Eigen::Index i = 0; i < z.size(); ++i)
        z(i) = sigmoid(z(i));
    return z;
}

Matrix last_hidden_activations(const MLPParams& params, const Matrix& x)
{
    const std::size_t L = params.layers.size();
    Matrix out(x.rows(), static_cast<Eigen::Index>(params.spec.last_hidden()));
    evaluate_chunks(params, x, [&](Eigen::Index start, Eigen::Index len, const Workspace& ws) {
        out.middleRows(start, len) = ws.act[L - 1].transpose();
    });
    return out;
}

LossGrad loss_and_grad(const MLPParams& params, const Matrix& x, const Eigen::VectorXd& labels)
{
    if (x.rows() == 0)
        throw DataError("loss_and_grad: empty batch");
    if (labels.size() != x.rows())
        throw DimensionError("loss_and_grad: label count does not match batch size");
    check_input_dim(params, static_cast<std::size_t>(x.cols()));
    Workspace ws(params.layers.size());
    ws.act[0] = x.transpose();
    LossGrad out{0.0, zeros_like(params)};
    out.loss = loss_grad_loaded(params, ws, labels, out.grads);
    return out;
}

TrainResult train(const MLPSpec& spec, const TrainConfig& config, const Matrix& x, const Eigen::VectorXd& labels,
                  std::uint64_t seed, const EpochHook& hook)
{
    spec.validate();
    config.validate();
    if (labels.size() != x.rows())
        throw DimensionError("train: label count does not match sample count");
    if (static_cast<std::size_t>(x.cols()) != spec.input_dim())
        throw DimensionError("train: input width " + std::to_string(x.cols()) + " does not match spec input " +
                             std::to_string(spec.input_dim()));
    std::size_t positives = 0;
    for (Eigen::Index i = 0; i < labels.size(); ++i) {
        if (labels(i) != 0.0 && labels(i) != 1.0)
            throw DataError("train: labels must be 0 or 1");
        positives += labels(i) == 1.0;
    }
    const auto N = static_cast<std::size_t>(x.rows());
    if (positives == 0 || positives == N)
        throw DataError("train: data contains a single class; the density ratio is undefined");

    Rng rng(seed);
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(N)));
    n_val = std::clamp<std::size_t>(n_val, 1, N - 1);
    const std::size_t n_train = N - n_val;

    const auto d = x.cols();
    Matrix x_train(static_cast<Eigen::Index>(n_train), d), x_val(static_cast<Eigen::Index>(n_val), d);
    Eigen::VectorXd y_train(static_cast<Eigen::Index>(n_train)), y_val(static_cast<Eigen::Index>(n_val));
    for (std::size_t i = 0; i < n_val; ++i) {
        x_val.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[i]));
        y_val(static_cast<Eigen::Index>(i)) = labels(static_cast<Eigen::Index>(order[i]));
    }
    for (std::size_t i = 0; i < n_train; ++i) {
        x_train.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[n_val + i]));
        y_train(static_cast<Eigen::Index>(i)) = labels(static_cast<Eigen::Index>(order[n_val + i]));
    }
    const double train_pos = y_train.sum();
    if (train_pos == 0.0 || train_pos == static_cast<double>(n_train))
        throw DataError("train: training partition contains a single class");

    MLPParams params = init_params(spec, splitmix64(seed ^ 0x5eed));
    auto m1 = zeros_like(params);
    auto m2 = zeros_like(params);
    auto grads = zeros_like(params);

    TrainResult result{params, {}, 0, std::numeric_limits<double>::infinity()};
    Workspace ws(params.layers.size());
    std::vector<std::size_t> batch_order(n_train);
    std::iota(batch_order.begin(), batch_order.end(), std::size_t{0});
    Eigen::VectorXd y_batch;
    std::size_t step = 0;
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
        if (hook)
            hook(epoch, x_train, x_val);
        std::shuffle(batch_order.begin(), batch_order.end(), rng);
        double train_total = 0.0;
        for (std::size_t start = 0; start < n_train; start += config.batch_size) {
            const std::size_t B = std::min(config.batch_size, n_train - start);
            ws.act[0].resize(d, static_cast<Eigen::Index>(B));
            y_batch.resize(static_cast<Eigen::Index>(B));
            for (std::size_t i = 0; i < B; ++i) {
                const auto r = static_cast<Eigen::Index>(batch_order[start + i]);
                ws.act[0].col(static_cast<Eigen::Index>(i)) = x_train.row(r).transpose();
                y_batch(static_cast<Eigen::Index>(i)) = y_train(r);
            }
            train_total += loss_grad_loaded(params, ws, y_batch, grads) * static_cast<double>(B);

            ++step;
            const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            const double lr = config.learning_rate;
            const double eps = config.epsilon_stability;
            auto update = [&](auto& theta, auto& g, auto& m, auto& v) {
                m = config.beta1 * m + (1.0 - config.beta1) * g;
                v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseAbs2();
                theta.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
            };
            for (std::size_t l = 0; l < params.layers.size(); ++l) {
                update(params.layers[l].weights, grads[l].weights, m1[l].weights, m2[l].weights);
                update(params.layers[l].bias, grads[l].bias, m1[l].bias, m2[l].bias);
            }
        }

        const double val = mean_loss(params, x_val, y_val);
        result.history.push_back({epoch, train_total / static_cast<double>(n_train), val});
        if (val < result.best_validation_loss) {
            result.best_validation_loss = val;
            result.best_epoch = epoch;
            result.params = params;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    if (!result.params.all_finite())
        throw DataError("train: parameters diverged to non-finite values");
    return result;
}

// ---------------------------------------------------------------------------
// Persistence

std::string format_mlp(const MLPParams& params)
{
    std::string out = "mlp v1\n";
    for (std::size_t i = 0; i < params.spec.layer_sizes.size(); ++i) {
        if (i)
            out += ' ';
        out += std::to_string(params.spec.layer_sizes[i]);
    }
    out += '\n';
    for (const auto& layer : params.layers) {
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
                if (c)
                    out += ' ';
                out += io::format_double(layer.weights(r, c));
            }
            out += '\n';
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
            if (r)
                out += ' ';
            out += io::format_double(layer.bias(r));
        }
        out += '\n';
    }
    return out;
}

MLPParams parse_mlp(std::span<const std::string> lines, std::size_t& pos, const std::string& where)
{
    auto fail = [&](std::size_t line, const std::string& why) -> ParseError {
        return ParseError(where + " line " + std::to_string(line + 1) + ": " + why);
    };
    auto next_values = [&](std::size_t expected, const char* what) {
        if (pos >= lines.size())
            throw fail(pos, std::string("unexpected end of file, expected ") + what);
        auto vals = io::parse_double_list(lines[pos], ' ', what);
        if (vals.size() != expected)
            throw fail(pos, std::string(what) + ": expected " + std::to_string(expected) + " values, got " +
                                std::to_string(vals.size()));
        ++pos;
        return vals;
    };

    if (pos >= lines.size() || io::trim(lines[pos]) != "mlp v1")
        throw fail(pos, "expected 'mlp v1'");
    ++pos;
    if (pos >= lines.size())
        throw fail(pos, "missing layer sizes");
    MLPParams p;
    for (auto tok : io::split(io::trim(lines[pos]), ' ')) {
        if (tok.empty())
            continue;
        auto v = io::parse_int(tok, "layer size");
        if (v <= 0)
            throw fail(pos, "layer sizes must be positive");
        p.spec.layer_sizes.push_back(static_cast<std::size_t>(v));
    }
    try {
        p.spec.validate();
    } catch (const SpecError& e) {
        throw fail(pos, e.what());
    }
    ++pos;
    for (std::size_t l = 0; l < p.spec.num_layers(); ++l) {
        const auto in = p.spec.layer_sizes[l];
        const auto out = p.spec.layer_sizes[l + 1];
        DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd(out)};
        for (std::size_t r = 0; r < out; ++r) {
            auto row = next_values(in, "weight row");
            for (std::size_t c = 0; c < in; ++c)
                layer.weights(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
        }
        auto bias = next_values(out, "bias vector");
        for (std::size_t r = 0; r < out; ++r)
            layer.bias(static_cast<Eigen::Index>(r)) = bias[r];
        p.layers.push_back(std::move(layer));
    }
    if (!p.all_finite())
        throw fail(pos, "non-finite parameter values");
    return p;
}

void save_mlp(const MLPParams& params, const std::filesystem::path& path)
{
    io::write_text(path, format_mlp(params));
}

MLPParams load_mlp(const std::filesystem::path& path)
{
    auto lines = io::read_lines(path);
    std::size_t pos = 0;
    return parse_mlp(lines, pos, "'" + path.string() + "'");
}

} // namespace srfilter
