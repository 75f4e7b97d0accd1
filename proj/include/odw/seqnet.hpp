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

#pragma once

// Single-layer many-to-one LSTM classifier.
//
// The recurrent cell is
//
//   f = sigmoid(Wf x + Uf h' + bf)      forget gate
//   i = sigmoid(Wi x + Ui h' + bi)      input gate
//   a = tanh(Wc x + Uc h' + bc)         candidate
//   o = sigmoid(Wo x + Uo h' + bo)      output gate
//   c = f .* c' + i .* a
//   h = o .* tanh(c)
//
// and the final hidden vector is mapped to class probabilities by an affine
// readout followed by softmax. Everything numeric is templated on the scalar
// type; training and serialization work in double.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "odw/error.hpp"
#include "odw/labels.hpp"

namespace odw::seqnet {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Input, recurrent and bias terms of one gate.
template <typename Scalar>
struct Gate {
    Matrix<Scalar> w; // hidden x inputs
    Matrix<Scalar> u; // hidden x hidden
    Vector<Scalar> b; // hidden

    bool operator==(const Gate& o) const { return w == o.w && u == o.u && b == o.b; }
};

template <typename Scalar>
struct LstmParams {
    Gate<Scalar> input;
    Gate<Scalar> output;
    Gate<Scalar> forget;
    Gate<Scalar> candidate;
    Matrix<Scalar> readout_w; // classes x hidden
    Vector<Scalar> readout_b; // classes

    Eigen::Index hidden() const noexcept { return input.b.size(); }
    Eigen::Index inputs() const noexcept { return input.w.cols(); }
    Eigen::Index classes() const noexcept { return readout_b.size(); }

    static LstmParams zeros(Eigen::Index hidden, Eigen::Index inputs, Eigen::Index classes) {
        LstmParams p;
        for (Gate<Scalar>* g : {&p.input, &p.output, &p.forget, &p.candidate}) {
            g->w = Matrix<Scalar>::Zero(hidden, inputs);
            g->u = Matrix<Scalar>::Zero(hidden, hidden);
            g->b = Vector<Scalar>::Zero(hidden);
        }
        p.readout_w = Matrix<Scalar>::Zero(classes, hidden);
        p.readout_b = Vector<Scalar>::Zero(classes);
        return p;
    }

    template <typename F>
    void for_each_tensor(F&& f) {
        for (Gate<Scalar>* g : {&input, &output, &forget, &candidate}) f(g->w);
        for (Gate<Scalar>* g : {&input, &output, &forget, &candidate}) f(g->u);
        for (Gate<Scalar>* g : {&input, &output, &forget, &candidate}) f(g->b);
        f(readout_w);
        f(readout_b);
    }

    template <typename F>
    void for_each_tensor(F&& f) const {
        for (const Gate<Scalar>* g : {&input, &output, &forget, &candidate}) f(g->w);
        for (const Gate<Scalar>* g : {&input, &output, &forget, &candidate}) f(g->u);
        for (const Gate<Scalar>* g : {&input, &output, &forget, &candidate}) f(g->b);
        f(readout_w);
        f(readout_b);
    }

    /// Throws DimMismatch for inconsistent shapes, NonFinite for NaN/Inf.
    void validate() const {
        const Eigen::Index m = hidden();
        const Eigen::Index l = inputs();
        if (m <= 0 || l <= 0 || classes() <= 0) {
            throw Error(ErrorCode::DimMismatch, "LSTM dimensions must be positive");
        }
        for (const Gate<Scalar>* g : {&input, &output, &forget, &candidate}) {
            if (g->w.rows() != m || g->w.cols() != l || g->u.rows() != m || g->u.cols() != m ||
                g->b.size() != m) {
                throw Error(ErrorCode::DimMismatch, "gate shapes disagree");
            }
        }
        if (readout_w.rows() != classes() || readout_w.cols() != m) {
            throw Error(ErrorCode::DimMismatch, "readout shape disagrees");
        }
        bool finite = true;
        for_each_tensor([&](const auto& t) { finite = finite && t.allFinite(); });
        if (!finite) {
            throw Error(ErrorCode::NonFinite, "LSTM parameters contain NaN/Inf");
        }
    }

    bool operator==(const LstmParams& o) const {
        return input == o.input && output == o.output && forget == o.forget &&
               candidate == o.candidate && readout_w == o.readout_w && readout_b == o.readout_b;
    }
};

template <typename Scalar>
struct LstmState {
    Vector<Scalar> h;
    Vector<Scalar> c;

    static LstmState zeros(Eigen::Index hidden) {
        return {Vector<Scalar>::Zero(hidden), Vector<Scalar>::Zero(hidden)};
    }
};

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& z) {
    using Scalar = typename Derived::Scalar;
    return (Scalar(1) + (-z.array()).exp()).inverse().matrix();
}

/// One recurrent step.
template <typename Scalar, typename Input>
LstmState<Scalar> cell_step(const LstmParams<Scalar>& p, const Eigen::MatrixBase<Input>& x,
                            const LstmState<Scalar>& prev) {
    if (x.size() != p.inputs()) {
        throw Error(ErrorCode::DimMismatch, "input has " + std::to_string(x.size()) +
                                                " channels, cell expects " +
                                                std::to_string(p.inputs()));
    }
    if (prev.h.size() != p.hidden() || prev.c.size() != p.hidden()) {
        throw Error(ErrorCode::DimMismatch, "state size disagrees with hidden size");
    }
    const auto pre = [&](const Gate<Scalar>& g) -> Vector<Scalar> {
        return g.w * x + g.u * prev.h + g.b;
    };
    const Vector<Scalar> f = sigmoid(pre(p.forget));
    const Vector<Scalar> i = sigmoid(pre(p.input));
    const Vector<Scalar> a = pre(p.candidate).array().tanh().matrix();
    const Vector<Scalar> o = sigmoid(pre(p.output));

    LstmState<Scalar> next;
    next.c = f.cwiseProduct(prev.c) + i.cwiseProduct(a);
    next.h = o.cwiseProduct(next.c.array().tanh().matrix());
    return next;
}

/// Runs the cell over the columns of window starting from the zero state.
template <typename Scalar, typename Window>
LstmState<Scalar> run_sequence(const LstmParams<Scalar>& p,
                               const Eigen::MatrixBase<Window>& window) {
    auto state = LstmState<Scalar>::zeros(p.hidden());
    for (Eigen::Index t = 0; t < window.cols(); ++t) {
        state = cell_step(p, window.col(t), state);
    }
    return state;
}

/// Numerically stable softmax.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
    using Scalar = typename Derived::Scalar;
    const Vector<Scalar> e = (logits.array() - logits.maxCoeff()).exp().matrix();
    return e / e.sum();
}

template <typename Scalar>
Vector<Scalar> readout_probabilities(const LstmParams<Scalar>& p, const Vector<Scalar>& h) {
    return softmax(p.readout_w * h + p.readout_b);
}

using Params = LstmParams<double>;
using State = LstmState<double>;
using WindowRef = Eigen::Ref<const Eigen::MatrixXd>;

/// Outcome of one classifier evaluation. evals counts the sequence passes
/// consumed to produce it.
struct ClassifierVerdict {
    LabelFamily family = LabelFamily::ActionUnit;
    int label = 0;
    Eigen::VectorXd confidence;
    std::size_t evals = 0;

    double top_confidence() const { return confidence.size() ? confidence[label] : 0.0; }
    AuLabel au() const { return static_cast<AuLabel>(label); }
    MoveState move_state() const { return static_cast<MoveState>(label); }
};

/// Label family implied by a readout width (5 movement states, 7 AUs).
LabelFamily family_for_classes(Eigen::Index classes);

/// Many-to-one evaluation of a window (inputs x length). Throws EmptyWindow
/// on a zero-length window.
ClassifierVerdict classify(const Params& params, const WindowRef& window);

/// Uniform(-1/sqrt(m), 1/sqrt(m)) weights, zero biases except forget = +1.
Params init_params(Eigen::Index hidden, Eigen::Index inputs, Eigen::Index classes,
                   std::uint64_t seed);

struct LabeledWindow {
    Eigen::MatrixXd samples; // inputs x length
    LabelFamily family = LabelFamily::ActionUnit;
    int label = 0;
};

struct TrainHyper {
    std::size_t epochs = 60;
    double lr = 0.05;
    Eigen::Index hidden = 16;
    std::uint64_t seed = 1;
    double clip_norm = 5.0;
    /// Windows per SGD update; 0 means the whole dataset.
    std::size_t batch_size = 1;
    /// Train on per-channel standardized inputs and fold the affine map back
    /// into the input weights and biases of the returned parameters.
    bool standardize = true;
};

struct TrainResult {
    Params params;
    std::vector<double> loss_history; // mean cross-entropy per epoch
    double final_loss = 0.0;
};

/// Cross-entropy SGD with backpropagation through time. Windows may have
/// different lengths; each is unrolled to its own length.
TrainResult train(std::span<const LabeledWindow> dataset, const TrainHyper& hyper);

/// Cross-entropy of one window; when grad is non-null the parameter gradient
/// is added to it (same shapes as params).
double loss_and_gradient(const Params& params, const WindowRef& window, int label,
                         Params* grad);

/// Global L2 norm over every tensor.
double norm(const Params& params);

inline constexpr std::uint32_t kWeightFileVersion = 1;

void save_params(const std::filesystem::path& path, const Params& params);
Params load_params(const std::filesystem::path& path);

std::vector<std::uint8_t> serialize(const Params& params);
Params deserialize(std::span<const std::uint8_t> bytes);

} // namespace odw::seqnet
