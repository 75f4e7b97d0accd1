/*
   Copyright 2026 The ODW Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#include "odw/seqnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include <zlib.h>

namespace odw::seqnet {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Gates stacked row-wise in file order: input, output, forget, candidate.
constexpr Index kInput = 0;
constexpr Index kOutput = 1;
constexpr Index kForget = 2;
constexpr Index kCandidate = 3;

struct Packed {
    MatrixXd w; // 4m x l
    MatrixXd u; // 4m x m
    VectorXd b; // 4m
    MatrixXd rw;
    VectorXd rb;

    Index m() const { return u.cols(); }

    static Packed from(const Params& p) {
        const Index m = p.hidden();
        Packed k;
        k.w.resize(4 * m, p.inputs());
        k.u.resize(4 * m, m);
        k.b.resize(4 * m);
        const Gate<double>* gates[4] = {&p.input, &p.output, &p.forget, &p.candidate};
        for (Index g = 0; g < 4; ++g) {
            k.w.middleRows(g * m, m) = gates[g]->w;
            k.u.middleRows(g * m, m) = gates[g]->u;
            k.b.segment(g * m, m) = gates[g]->b;
        }
        k.rw = p.readout_w;
        k.rb = p.readout_b;
        return k;
    }

    void unpack_into(Params& p) const {
        const Index m = this->m();
        Gate<double>* gates[4] = {&p.input, &p.output, &p.forget, &p.candidate};
        for (Index g = 0; g < 4; ++g) {
            gates[g]->w = w.middleRows(g * m, m);
            gates[g]->u = u.middleRows(g * m, m);
            gates[g]->b = b.segment(g * m, m);
        }
        p.readout_w = rw;
        p.readout_b = rb;
    }

    void set_zero_like(const Packed& o) {
        w.setZero(o.w.rows(), o.w.cols());
        u.setZero(o.u.rows(), o.u.cols());
        b.setZero(o.b.size());
        rw.setZero(o.rw.rows(), o.rw.cols());
        rb.setZero(o.rb.size());
    }

    double squared_norm() const {
        return w.squaredNorm() + u.squaredNorm() + b.squaredNorm() + rw.squaredNorm() +
               rb.squaredNorm();
    }

    void scale(double s) {
        w *= s;
        u *= s;
        b *= s;
        rw *= s;
        rb *= s;
    }

    void add_scaled(const Packed& o, double s) {
        w += s * o.w;
        u += s * o.u;
        b += s * o.b;
        rw += s * o.rw;
        rb += s * o.rb;
    }
};

// Forward/backward workspace reused across windows.
struct Workspace {
    MatrixXd act; // 4m x T gate activations
    MatrixXd c;   // m x (T+1), column 0 is the initial state
    MatrixXd h;   // m x (T+1)
    MatrixXd dz;  // 4m x T
};

inline double sigmoid1(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double forward_backward(const Packed& k, const WindowRef& x, int label, Workspace& ws,
                        Packed* grad) {
    const Index m = k.m();
    const Index T = x.cols();
    if (T == 0) {
        throw Error(ErrorCode::EmptyWindow, "cannot evaluate an empty window");
    }
    if (x.rows() != k.w.cols()) {
        throw Error(ErrorCode::DimMismatch, "window channel count disagrees with the model");
    }
    if (label < 0 || label >= k.rb.size()) {
        throw Error(ErrorCode::InvalidArgument, "label out of range");
    }

    ws.act.noalias() = k.w * x;
    ws.act.colwise() += k.b;
    ws.c.resize(m, T + 1);
    ws.h.resize(m, T + 1);
    ws.c.col(0).setZero();
    ws.h.col(0).setZero();
    for (Index t = 0; t < T; ++t) {
        auto z = ws.act.col(t);
        z.noalias() += k.u * ws.h.col(t);
        for (Index j = 0; j < 3 * m; ++j) {
            z[j] = sigmoid1(z[j]);
        }
        for (Index j = 3 * m; j < 4 * m; ++j) {
            z[j] = std::tanh(z[j]);
        }
        const auto i = z.segment(kInput * m, m).array();
        const auto o = z.segment(kOutput * m, m).array();
        const auto f = z.segment(kForget * m, m).array();
        const auto a = z.segment(kCandidate * m, m).array();
        ws.c.col(t + 1) = (f * ws.c.col(t).array() + i * a).matrix();
        ws.h.col(t + 1) = (o * ws.c.col(t + 1).array().tanh()).matrix();
    }

    const VectorXd logits = k.rw * ws.h.col(T) + k.rb;
    const double mx = logits.maxCoeff();
    const double lse = mx + std::log((logits.array() - mx).exp().sum());
    const double loss = lse - logits[label];
    if (grad == nullptr) {
        return loss;
    }

    VectorXd dlogits = (logits.array() - lse).exp().matrix();
    dlogits[label] -= 1.0;
    grad->rw.noalias() += dlogits * ws.h.col(T).transpose();
    grad->rb += dlogits;

    VectorXd dh = k.rw.transpose() * dlogits;
    VectorXd dc = VectorXd::Zero(m);
    ws.dz.resize(4 * m, T);
    for (Index t = T - 1; t >= 0; --t) {
        const auto z = ws.act.col(t);
        const auto i = z.segment(kInput * m, m).array();
        const auto o = z.segment(kOutput * m, m).array();
        const auto f = z.segment(kForget * m, m).array();
        const auto a = z.segment(kCandidate * m, m).array();
        const Eigen::ArrayXd tc = ws.c.col(t + 1).array().tanh();

        dc.array() += dh.array() * o * (1.0 - tc.square());
        auto dz = ws.dz.col(t);
        dz.segment(kOutput * m, m) = (dh.array() * tc * o * (1.0 - o)).matrix();
        dz.segment(kForget * m, m) = (dc.array() * ws.c.col(t).array() * f * (1.0 - f)).matrix();
        dz.segment(kInput * m, m) = (dc.array() * a * i * (1.0 - i)).matrix();
        dz.segment(kCandidate * m, m) = (dc.array() * i * (1.0 - a.square())).matrix();

        dh.noalias() = k.u.transpose() * dz;
        dc.array() *= f;
    }
    grad->w.noalias() += ws.dz * x.transpose();
    grad->u.noalias() += ws.dz * ws.h.leftCols(T).transpose();
    grad->b += ws.dz.rowwise().sum();
    return loss;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) {
        out.push_back(static_cast<std::uint8_t>(v >> s));
    }
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int s = 0; s < 64; s += 8) {
        out.push_back(static_cast<std::uint8_t>(bits >> s));
    }
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
    std::uint32_t v = 0;
    for (int s = 0; s < 4; ++s) {
        v |= static_cast<std::uint32_t>(in[at + s]) << (8 * s);
    }
    return v;
}

double get_f64(std::span<const std::uint8_t> in, std::size_t at) {
    std::uint64_t v = 0;
    for (int s = 0; s < 8; ++s) {
        v |= static_cast<std::uint64_t>(in[at + s]) << (8 * s);
    }
    return std::bit_cast<double>(v);
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

constexpr std::size_t kHeaderBytes = 4 + 4 * 4;
constexpr std::uint32_t kMaxDim = 1u << 16;

} // namespace

LabelFamily family_for_classes(Eigen::Index classes) {
    if (classes == static_cast<Eigen::Index>(kMoveStateCount)) return LabelFamily::MoveState;
    if (classes == static_cast<Eigen::Index>(kAuCount)) return LabelFamily::ActionUnit;
    throw Error(ErrorCode::DimMismatch,
                "no label family has " + std::to_string(classes) + " classes");
}

ClassifierVerdict classify(const Params& params, const WindowRef& window) {
    if (window.cols() == 0) {
        throw Error(ErrorCode::EmptyWindow, "cannot classify an empty window");
    }
    const State state = run_sequence(params, window);
    ClassifierVerdict v;
    v.confidence = readout_probabilities(params, state.h);
    Eigen::Index best = 0;
    v.confidence.maxCoeff(&best); // first maximum wins ties
    v.label = static_cast<int>(best);
    v.family = params.classes() == static_cast<Eigen::Index>(kMoveStateCount)
                   ? LabelFamily::MoveState
                   : LabelFamily::ActionUnit;
    v.evals = 1;
    return v;
}

Params init_params(Eigen::Index hidden, Eigen::Index inputs, Eigen::Index classes,
                   std::uint64_t seed) {
    if (hidden <= 0 || inputs <= 0 || classes <= 0) {
        throw Error(ErrorCode::DimMismatch, "LSTM dimensions must be positive");
    }
    std::mt19937_64 rng(seed);
    const double r = 1.0 / std::sqrt(static_cast<double>(hidden));
    std::uniform_real_distribution<double> dist(-r, r);
    Params p = Params::zeros(hidden, inputs, classes);
    const auto fill = [&](auto& t) {
        for (Eigen::Index j = 0; j < t.cols(); ++j)
            for (Eigen::Index i = 0; i < t.rows(); ++i) t(i, j) = dist(rng);
    };
    for (Gate<double>* g : {&p.input, &p.output, &p.forget, &p.candidate}) {
        fill(g->w);
        fill(g->u);
    }
    fill(p.readout_w);
    p.forget.b.setOnes();
    return p;
}

double loss_and_gradient(const Params& params, const WindowRef& window, int label,
                         Params* grad) {
    const Packed k = Packed::from(params);
    Workspace ws;
    if (grad == nullptr) {
        return forward_backward(k, window, label, ws, nullptr);
    }
    if (grad->hidden() != params.hidden() || grad->inputs() != params.inputs() ||
        grad->classes() != params.classes()) {
        *grad = Params::zeros(params.hidden(), params.inputs(), params.classes());
    }
    Packed g = Packed::from(*grad);
    const double loss = forward_backward(k, window, label, ws, &g);
    g.unpack_into(*grad);
    return loss;
}

double norm(const Params& params) {
    double sq = 0.0;
    params.for_each_tensor([&](const auto& t) { sq += t.squaredNorm(); });
    return std::sqrt(sq);
}

TrainResult train(std::span<const LabeledWindow> dataset, const TrainHyper& hyper) {
    if (dataset.empty()) {
        throw Error(ErrorCode::EmptyDataset, "training set is empty");
    }
    const LabelFamily family = dataset.front().family;
    const Index inputs = dataset.front().samples.rows();
    const Index classes = static_cast<Index>(class_count(family));
    for (const LabeledWindow& w : dataset) {
        if (w.family != family) {
            throw Error(ErrorCode::MixedLabelFamilies, "dataset mixes movement-state and AU labels");
        }
        if (w.samples.cols() == 0) {
            throw Error(ErrorCode::EmptyWindow, "training window of length zero");
        }
        if (w.samples.rows() != inputs) {
            throw Error(ErrorCode::DimMismatch, "training windows disagree on channel count");
        }
        if (w.label < 0 || w.label >= classes) {
            throw Error(ErrorCode::InvalidArgument, "label out of range for its family");
        }
    }
    if (!(hyper.lr >= 0.0) || hyper.hidden <= 0) {
        throw Error(ErrorCode::InvalidArgument, "bad training hyperparameters");
    }

    // Per-channel affine normalisation, later folded into the input weights.
    VectorXd mean = VectorXd::Zero(inputs);
    VectorXd stdev = VectorXd::Ones(inputs);
    if (hyper.standardize) {
        double count = 0.0;
        VectorXd sum = VectorXd::Zero(inputs);
        VectorXd sq = VectorXd::Zero(inputs);
        for (const LabeledWindow& w : dataset) {
            sum += w.samples.rowwise().sum();
            sq += w.samples.array().square().matrix().rowwise().sum();
            count += static_cast<double>(w.samples.cols());
        }
        mean = sum / count;
        const VectorXd var = (sq / count - mean.cwiseProduct(mean)).cwiseMax(0.0);
        for (Index c = 0; c < inputs; ++c) {
            stdev[c] = var[c] > 1e-18 ? std::sqrt(var[c]) : 1.0;
        }
    }
    std::vector<MatrixXd> xs;
    xs.reserve(dataset.size());
    for (const LabeledWindow& w : dataset) {
        if (hyper.standardize) {
            xs.emplace_back(((w.samples.colwise() - mean).array().colwise() / stdev.array()).matrix());
        } else {
            xs.emplace_back(w.samples);
        }
    }

    Params init = init_params(hyper.hidden, inputs, classes, hyper.seed);
    Packed k = Packed::from(init);
    Packed g;
    g.set_zero_like(k);
    Workspace ws;

    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(hyper.seed ^ 0x9E3779B97F4A7C15ull);
    const std::size_t batch = hyper.batch_size == 0 ? dataset.size() : hyper.batch_size;

    TrainResult result;
    result.loss_history.reserve(hyper.epochs);
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        if (batch < dataset.size()) {
            std::shuffle(order.begin(), order.end(), rng);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t stop = std::min(order.size(), start + batch);
            g.set_zero_like(k);
            for (std::size_t n = start; n < stop; ++n) {
                const std::size_t idx = order[n];
                epoch_loss += forward_backward(k, xs[idx], dataset[idx].label, ws, &g);
            }
            g.scale(1.0 / static_cast<double>(stop - start));
            const double gn = std::sqrt(g.squared_norm());
            if (hyper.clip_norm > 0.0 && gn > hyper.clip_norm) {
                g.scale(hyper.clip_norm / gn);
            }
            if (hyper.lr > 0.0) {
                k.add_scaled(g, -hyper.lr);
            }
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(dataset.size()));
    }
    result.final_loss = result.loss_history.empty() ? 0.0 : result.loss_history.back();

    if (hyper.standardize) {
        // W (x - mean) / s + b  ==  (W diag(1/s)) x + (b - W (mean / s))
        const VectorXd inv = stdev.cwiseInverse();
        const VectorXd shift = mean.cwiseProduct(inv);
        k.b -= k.w * shift;
        k.w = k.w * inv.asDiagonal();
    }
    result.params = init;
    k.unpack_into(result.params);
    return result;
}

std::vector<std::uint8_t> serialize(const Params& params) {
    params.validate();
    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'O', 'D', 'W', '1'});
    put_u32(out, kWeightFileVersion);
    put_u32(out, static_cast<std::uint32_t>(params.hidden()));
    put_u32(out, static_cast<std::uint32_t>(params.inputs()));
    put_u32(out, static_cast<std::uint32_t>(params.classes()));
    params.for_each_tensor([&](const auto& t) {
        for (Eigen::Index i = 0; i < t.rows(); ++i)
            for (Eigen::Index j = 0; j < t.cols(); ++j) put_f64(out, t(i, j));
    });
    put_u32(out, crc32_of(out));
    return out;
}

Params deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kHeaderBytes + 4) {
        throw Error(ErrorCode::CorruptFile, "weight file truncated");
    }
    if (!(bytes[0] == 'O' && bytes[1] == 'D' && bytes[2] == 'W' && bytes[3] == '1')) {
        throw Error(ErrorCode::FormatVersionMismatch, "bad magic");
    }
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kWeightFileVersion) {
        throw Error(ErrorCode::FormatVersionMismatch,
                    "unsupported weight file version " + std::to_string(version));
    }
    const std::uint32_t m = get_u32(bytes, 8);
    const std::uint32_t l = get_u32(bytes, 12);
    const std::uint32_t k = get_u32(bytes, 16);
    if (m == 0 || l == 0 || k == 0 || m > kMaxDim || l > kMaxDim || k > kMaxDim) {
        throw Error(ErrorCode::FormatVersionMismatch, "invalid dimensions in weight file");
    }
    const std::size_t values = 4 * (std::size_t{m} * l + std::size_t{m} * m + m) +
                               std::size_t{k} * m + k;
    const std::size_t expected = kHeaderBytes + 8 * values + 4;
    if (bytes.size() != expected) {
        throw Error(ErrorCode::CorruptFile, "weight file has " + std::to_string(bytes.size()) +
                                                " bytes, expected " + std::to_string(expected));
    }
    if (crc32_of(bytes.first(expected - 4)) != get_u32(bytes, expected - 4)) {
        throw Error(ErrorCode::CorruptFile, "checksum mismatch");
    }
    Params p = Params::zeros(m, l, k);
    std::size_t at = kHeaderBytes;
    p.for_each_tensor([&](auto& t) {
        for (Eigen::Index i = 0; i < t.rows(); ++i)
            for (Eigen::Index j = 0; j < t.cols(); ++j) {
                t(i, j) = get_f64(bytes, at);
                at += 8;
            }
    });
    p.validate();
    return p;
}

void save_params(const std::filesystem::path& path, const Params& params) {
    const auto bytes = serialize(params);
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error(ErrorCode::Io, "failed writing '" + path.string() + "'");
    }
}

Params load_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

} // namespace odw::seqnet
