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

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "odw/error.hpp"
#include "odw/seqnet.hpp"

using namespace odw;
using namespace odw::seqnet;

namespace {

// Straight-line scalar LSTM step written from the gate equations, using
// plain arrays and no Eigen arithmetic.
struct ScalarCell {
    int m;
    int l;
    // gate order: input, output, forget, candidate
    std::vector<double> w[4], u[4], b[4];

    explicit ScalarCell(const Params& p) : m(static_cast<int>(p.hidden())), l(static_cast<int>(p.inputs())) {
        const Gate<double>* gates[4] = {&p.input, &p.output, &p.forget, &p.candidate};
        for (int g = 0; g < 4; ++g) {
            for (int r = 0; r < m; ++r) {
                for (int c = 0; c < l; ++c) w[g].push_back(gates[g]->w(r, c));
                for (int c = 0; c < m; ++c) u[g].push_back(gates[g]->u(r, c));
                b[g].push_back(gates[g]->b(r));
            }
        }
    }

    void step(const std::vector<double>& x, std::vector<double>& h, std::vector<double>& c) const {
        std::vector<double> nh(m), nc(m);
        for (int r = 0; r < m; ++r) {
            double z[4];
            for (int g = 0; g < 4; ++g) {
                double s = b[g][r];
                for (int k = 0; k < l; ++k) s += w[g][r * l + k] * x[k];
                for (int k = 0; k < m; ++k) s += u[g][r * m + k] * h[k];
                z[g] = s;
            }
            const double in = 1.0 / (1.0 + std::exp(-z[0]));
            const double out = 1.0 / (1.0 + std::exp(-z[1]));
            const double fg = 1.0 / (1.0 + std::exp(-z[2]));
            const double cand = std::tanh(z[3]);
            nc[r] = fg * c[r] + in * cand;
            nh[r] = out * std::tanh(nc[r]);
        }
        h = nh;
        c = nc;
    }
};

Params random_params(Eigen::Index m, Eigen::Index l, Eigen::Index k, std::uint64_t seed,
                     double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    Params p = Params::zeros(m, l, k);
    p.for_each_tensor([&](auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = u(rng);
    });
    return p;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

// Bitwise CRC-32 (reflected, polynomial 0xEDB88320).
std::uint32_t crc32_oracle(const std::uint8_t* data, std::size_t n) {
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < n; ++i) {
        crc ^= data[i];
        for (int b = 0; b < 8; ++b) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
    return ~crc;
}

std::uint32_t read_u32(const std::vector<std::uint8_t>& b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
           static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

// Two-class toy set: class 1 windows drift upward on channel 0, class 0 downward.
std::vector<LabeledWindow> toy_dataset(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::uniform_int_distribution<int> len(4, 9);
    std::vector<LabeledWindow> out;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const int t = len(rng);
        Eigen::MatrixXd x(3, t);
        for (int j = 0; j < t; ++j) {
            x(0, j) = (label == 1 ? 1.0 : -1.0) * 0.2 * j + noise(rng);
            x(1, j) = noise(rng);
            x(2, j) = 0.5 + noise(rng);
        }
        out.push_back({x, LabelFamily::MoveState, label});
    }
    return out;
}

} // namespace

TEST_CASE("zero parameters") {
    const Params p = Params::zeros(3, 6, 7);
    const Eigen::VectorXd x = Eigen::VectorXd::Random(6);
    SUBCASE("zero state stays zero") {
        const State s = cell_step(p, x, State::zeros(3));
        CHECK(s.h.isZero(0));
        CHECK(s.c.isZero(0));
    }
    SUBCASE("unit cell state halves") {
        State prev = State::zeros(3);
        prev.c.setOnes();
        const State s = cell_step(p, x, prev);
        for (Eigen::Index j = 0; j < 3; ++j) {
            CHECK(s.c[j] == 0.5);
            CHECK(s.h[j] == doctest::Approx(0.5 * std::tanh(0.5)).epsilon(1e-15));
            CHECK(s.h[j] == doctest::Approx(0.23105).epsilon(1e-4));
        }
    }
    SUBCASE("uniform verdict, first class wins") {
        const ClassifierVerdict v = classify(p, Eigen::MatrixXd::Random(6, 10));
        CHECK(v.label == 0);
        CHECK(v.evals == 1);
        CHECK(v.family == LabelFamily::ActionUnit);
        for (Eigen::Index k = 0; k < 7; ++k) CHECK(v.confidence[k] == doctest::Approx(1.0 / 7));
    }
}

TEST_CASE("cell matches the scalar oracle") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dim(1, 4);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    double worst = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int m = dim(rng);
        const int l = dim(rng) + 2;
        const Params p = random_params(m, l, 3, rng(), 1.5);
        std::vector<double> x(l), h(m), c(m);
        for (double& v : x) v = u(rng);
        for (double& v : h) v = u(rng) / 2;
        for (double& v : c) v = u(rng);
        State prev;
        prev.h = Eigen::Map<Eigen::VectorXd>(h.data(), m);
        prev.c = Eigen::Map<Eigen::VectorXd>(c.data(), m);
        const State got = cell_step(p, Eigen::Map<Eigen::VectorXd>(x.data(), l), prev);
        ScalarCell(p).step(x, h, c);
        for (int j = 0; j < m; ++j) {
            worst = std::max({worst, rel_err(got.h[j], h[j]), rel_err(got.c[j], c[j])});
            CHECK(std::abs(got.h[j]) < 1.0);
        }
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("cell works in single precision too") {
    const Params pd = random_params(3, 4, 2, 5);
    LstmParams<float> pf = LstmParams<float>::zeros(3, 4, 2);
    pf.input.w = pd.input.w.cast<float>();
    pf.output.u = pd.output.u.cast<float>();
    pf.forget.b = pd.forget.b.cast<float>();
    const Eigen::VectorXf x = Eigen::VectorXf::Constant(4, 0.5f);
    const auto s = cell_step(pf, x, LstmState<float>::zeros(3));
    CHECK(s.h.allFinite());
}

TEST_CASE("mismatched input is rejected") {
    const Params p = Params::zeros(2, 6, 5);
    CHECK_THROWS_AS(cell_step(p, Eigen::VectorXd::Zero(5), State::zeros(2)), Error);
    CHECK_THROWS_AS(classify(p, Eigen::MatrixXd::Zero(6, 0)), Error);
    CHECK_THROWS_AS(classify(p, Eigen::MatrixXd::Zero(4, 3)), Error);
}

TEST_CASE("classification is stateful and deterministic") {
    const Params p = random_params(4, 6, 5, 17);
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, -1, 1);
    const Eigen::MatrixXd once = x;
    const Eigen::MatrixXd many = x.replicate(1, 40);
    const auto a = classify(p, once);
    const auto b = classify(p, many);
    CHECK(a.family == LabelFamily::MoveState);
    CHECK((a.confidence - b.confidence).norm() > 1e-6);
    const auto c = classify(p, many);
    CHECK(c.label == b.label);
    CHECK(c.confidence == b.confidence);
    CHECK(b.confidence.sum() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(b.confidence.minCoeff() >= 0.0);
    Eigen::Index arg;
    b.confidence.maxCoeff(&arg);
    CHECK(b.label == arg);
}

TEST_CASE("gradient matches central differences") {
    const Params p = random_params(3, 6, 5, 99, 0.8);
    const Eigen::MatrixXd window = Eigen::MatrixXd::Random(6, 7);
    const int label = 2;
    Params grad = Params::zeros(3, 6, 5);
    loss_and_gradient(p, window, label, &grad);

    // Flatten tensor pointers so coordinates can be drawn uniformly.
    std::vector<double*> slots;
    Params probe = p;
    probe.for_each_tensor([&](auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) slots.push_back(t.data() + i);
    });
    std::vector<const double*> gslots;
    std::as_const(grad).for_each_tensor([&](const auto& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) gslots.push_back(t.data() + i);
    });
    REQUIRE(slots.size() == gslots.size());

    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> pick(0, slots.size() - 1);
    const double eps = 1e-5;
    for (int n = 0; n < 5; ++n) {
        const std::size_t at = pick(rng);
        const double saved = *slots[at];
        *slots[at] = saved + eps;
        const double up = loss_and_gradient(probe, window, label, nullptr);
        *slots[at] = saved - eps;
        const double down = loss_and_gradient(probe, window, label, nullptr);
        *slots[at] = saved;
        const double numeric = (up - down) / (2 * eps);
        CAPTURE(at);
        CHECK(rel_err(*gslots[at], numeric) < 1e-4);
    }
}

TEST_CASE("training on separable toy sequences") {
    const auto data = toy_dataset(40, 3);
    TrainHyper hyper;
    hyper.epochs = 200;
    hyper.lr = 0.1;
    hyper.hidden = 4;
    hyper.seed = 5;
    const TrainResult r = train(data, hyper);
    std::size_t right = 0;
    for (const auto& w : data) right += classify(r.params, w.samples).label == w.label ? 1 : 0;
    CHECK(right == data.size());
    CHECK(r.loss_history.size() == 200);
    CHECK(r.params.classes() == 5); // width follows the label family
}

TEST_CASE("zero learning rate leaves the initialization") {
    const auto data = toy_dataset(10, 4);
    TrainHyper hyper;
    hyper.epochs = 5;
    hyper.lr = 0.0;
    hyper.hidden = 3;
    hyper.seed = 12;
    hyper.standardize = false;
    CHECK(train(data, hyper).params == init_params(3, 3, 5, 12));
}

TEST_CASE("small steps give a mostly falling loss") {
    const auto data = toy_dataset(30, 6);
    TrainHyper hyper;
    hyper.epochs = 60;
    hyper.lr = 1e-3;
    hyper.hidden = 4;
    hyper.batch_size = 0;
    const auto r = train(data, hyper);
    std::size_t rises = 0;
    for (std::size_t e = 1; e < r.loss_history.size(); ++e) {
        rises += r.loss_history[e] > r.loss_history[e - 1] ? 1 : 0;
    }
    CHECK(static_cast<double>(rises) <= 0.05 * static_cast<double>(r.loss_history.size()));
    CHECK(r.loss_history.back() < r.loss_history.front());
}

TEST_CASE("training is reproducible for a seed") {
    const auto data = toy_dataset(20, 8);
    TrainHyper hyper;
    hyper.epochs = 10;
    hyper.hidden = 3;
    CHECK(train(data, hyper).params == train(data, hyper).params);
}

TEST_CASE("training input errors") {
    TrainHyper hyper;
    CHECK_THROWS_AS(train(std::vector<LabeledWindow>{}, hyper), Error);
    auto data = toy_dataset(4, 1);
    data[1].family = LabelFamily::ActionUnit;
    CHECK_THROWS_AS(train(data, hyper), Error);
}

TEST_CASE("initialization bounds") {
    const Params p = init_params(4, 6, 7, 3);
    const double bound = 1.0 / std::sqrt(4.0);
    CHECK(p.input.w.cwiseAbs().maxCoeff() <= bound);
    CHECK(p.candidate.u.cwiseAbs().maxCoeff() <= bound);
    CHECK(p.forget.b.isOnes());
    CHECK(p.input.b.isZero());
}

TEST_CASE("weight file layout and round trip") {
    const Params p = random_params(3, 6, 7, 21);
    const auto bytes = serialize(p);
    const std::size_t m = 3, l = 6, k = 7;
    const std::size_t doubles = 4 * m * l + 4 * m * m + 4 * m + k * m + k;
    REQUIRE(bytes.size() == 20 + 8 * doubles + 4);
    CHECK(std::memcmp(bytes.data(), "ODW1", 4) == 0);
    CHECK(read_u32(bytes, 4) == kWeightFileVersion);
    CHECK(read_u32(bytes, 8) == m);
    CHECK(read_u32(bytes, 12) == l);
    CHECK(read_u32(bytes, 16) == k);
    double first;
    std::memcpy(&first, bytes.data() + 20, 8);
    CHECK(first == p.input.w(0, 0));
    double second;
    std::memcpy(&second, bytes.data() + 28, 8);
    CHECK(second == p.input.w(0, 1));
    CHECK(read_u32(bytes, bytes.size() - 4) == crc32_oracle(bytes.data(), bytes.size() - 4));

    CHECK(deserialize(bytes) == p);
    const auto path = std::filesystem::temp_directory_path() / "odw_test_weights.odw";
    save_params(path, p);
    CHECK(load_params(path) == p);
    std::filesystem::remove(path);
}

TEST_CASE("weight file damage") {
    const auto bytes = serialize(random_params(2, 6, 5, 1));
    const auto code_of = [](std::span<const std::uint8_t> b) {
        try {
            deserialize(b);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Io; // sentinel: no error
    };
    CHECK(code_of(std::span(bytes).first(bytes.size() - 9)) == ErrorCode::CorruptFile);
    CHECK(code_of(std::span(bytes).first(10)) == ErrorCode::CorruptFile);
    auto flipped = bytes;
    flipped[40] ^= 0x01;
    CHECK(code_of(flipped) == ErrorCode::CorruptFile);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK(code_of(magic) == ErrorCode::FormatVersionMismatch);

    // A header claiming zero hidden units, with a valid checksum.
    std::vector<std::uint8_t> empty{'O', 'D', 'W', '1', 1, 0, 0, 0, 0, 0, 0, 0, 6, 0, 0, 0, 7, 0, 0, 0};
    const std::uint32_t crc = crc32_oracle(empty.data(), empty.size());
    for (int i = 0; i < 4; ++i) empty.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
    CHECK(code_of(empty) == ErrorCode::FormatVersionMismatch);

    CHECK_THROWS_AS(load_params("/nonexistent/odw/weights.odw"), Error);
}
