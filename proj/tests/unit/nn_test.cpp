#include <cmath>
#include <filesystem>
#include <functional>

#include "cmtr/encoder.hpp"
#include "cmtr/error.hpp"
#include "cmtr/nn.hpp"
#include "doctest.h"

using namespace cmtr;
using namespace cmtr::nn;

namespace {

// Relative error of analytic vs central-difference gradient for every entry
// of param, where loss() re-runs the forward pass.
double max_relative_error(Parameter& param, const std::function<double()>& loss, double h = 1e-5,
                          Eigen::Index max_entries = 40) {
    double worst = 0.0;
    const Eigen::Index n = param.value.size();
    const Eigen::Index stride = std::max<Eigen::Index>(1, n / max_entries);
    for (Eigen::Index i = 0; i < n; i += stride) {
        double& v = param.value.data()[i];
        const double saved = v;
        v = saved + h;
        const double up = loss();
        v = saved - h;
        const double down = loss();
        v = saved;
        const double numeric = (up - down) / (2 * h);
        const double analytic = param.grad.data()[i];
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
        worst = std::max(worst, std::abs(numeric - analytic) / denom);
    }
    return worst;
}

encoder::EncoderConfig small_config() {
    encoder::EncoderConfig c;
    c.layers = 2;
    c.hidden_dim = 8;
    c.heads = 2;
    c.intermediate_dim = 16;
    c.max_positions = 16;
    c.vocab_size = 20;
    c.init_stddev = 0.3;  // larger weights make the check more sensitive
    return c;
}

}  // namespace

TEST_CASE("linear and layer norm gradients") {
    Rng rng(1);
    Linear lin("l", 4, 3, normal_matrix(4, 3, 0.5, rng));
    lin.bias.value = normal_matrix(1, 3, 0.5, rng);
    LayerNorm ln("n", 3, 1e-5);
    ln.gamma.value = normal_matrix(1, 3, 1.0, rng);
    ln.beta.value = normal_matrix(1, 3, 1.0, rng);
    const Matrix x = normal_matrix(5, 4, 1.0, rng);
    const Matrix r = normal_matrix(5, 3, 1.0, rng);
    auto loss = [&] { return (ln.forward(gelu(lin.forward(x)), nullptr).array() * r.array()).sum(); };

    const Matrix pre = lin.forward(x);
    LayerNorm::Cache cache;
    ln.forward(gelu(pre), &cache);
    const Matrix d_act = ln.backward(cache, r);
    lin.backward(x, d_act.cwiseProduct(gelu_grad(pre)));
    CHECK(max_relative_error(lin.weight, loss) < 1e-6);
    CHECK(max_relative_error(lin.bias, loss) < 1e-6);
    CHECK(max_relative_error(ln.gamma, loss) < 1e-6);
    CHECK(max_relative_error(ln.beta, loss) < 1e-6);
}

TEST_CASE("gelu and softmax values") {
    Matrix x(1, 3);
    x << -1.0, 0.0, 2.0;
    const Matrix g = gelu(x);
    CHECK(g(0, 0) == doctest::Approx(-0.15865525393145707));
    CHECK(g(0, 1) == 0.0);
    CHECK(g(0, 2) == doctest::Approx(1.9544997361036416));
    Vector l(3);
    l << 1000.0, 1000.0, 0.0;
    const Vector p = softmax(l);
    CHECK(p(0) == doctest::Approx(0.5));
    CHECK(p.sum() == doctest::Approx(1.0));
}

TEST_CASE("adamw matches a hand computed step") {
    Parameter p("p", Matrix::Constant(1, 1, 1.0));
    p.grad(0, 0) = 0.5;
    AdamW opt({&p}, {0.1, 0.01, 0.9, 0.999, 1e-8});
    opt.step();
    // decay: 1 * (1 - 0.001); bias-corrected moments give m/sqrt(v) = 1
    CHECK(p.value(0, 0) == doctest::Approx(0.999 - 0.1 * 0.5 / (0.5 + 1e-8)).epsilon(1e-12));
    CHECK(opt.steps() == 1);
}

TEST_CASE("transformer encoder gradients match finite differences") {
    encoder::TransformerEncoder enc(small_config(), 11);
    const TokenSequence ids{2, 5, 7, 7, 11, 3, 19};
    Rng rng(4);
    const Vector r = normal_matrix(8, 1, 1.0, rng).col(0);
    auto loss = [&] { return enc.forward(ids).dot(r); };

    enc.zero_grad();
    encoder::TransformerEncoder::Cache cache;
    enc.forward(ids, &cache);
    enc.backward(cache, r);
    for (auto* p : enc.parameters()) {
        CAPTURE(p->name);
        CHECK(max_relative_error(*p, loss, 1e-5, 12) < 1e-4);
    }
}

TEST_CASE("encoder guards its inputs") {
    encoder::TransformerEncoder enc(small_config(), 1);
    const TokenSequence too_long(17, 1), bad_id{2, 25}, empty;
    CHECK_THROWS_AS(enc.forward(too_long), RuntimeError);
    CHECK_THROWS_AS(enc.forward(bad_id), RuntimeError);
    CHECK_THROWS(enc.forward(empty));

    encoder::TransformerEncoder frozen(small_config(), 1);
    frozen.set_trainable(false);
    encoder::TransformerEncoder::Cache cache;
    const TokenSequence ids{2, 3};
    frozen.forward(ids, &cache);
    CHECK_THROWS(frozen.backward(cache, Vector::Ones(8)));
}

TEST_CASE("encoder config validation") {
    auto c = small_config();
    c.heads = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    CHECK_THROWS_AS(c.validate_for(chunker::ChunkPlan{16, 2, 4}), ConfigError);
    c.validate_for(chunker::ChunkPlan{15, 2, 4});
    CHECK_NOTHROW(encoder::EncoderConfig{}.validate_for(chunker::encoder_plan()));
}

TEST_CASE("encoder save and load round trip") {
    encoder::TransformerEncoder enc(small_config(), 3);
    const auto path = std::filesystem::temp_directory_path() / "cmtr_encoder_test.bin";
    enc.save(path);
    const auto back = encoder::TransformerEncoder::load(path);
    const TokenSequence ids{2, 9, 4};
    CHECK((back.forward(ids) - enc.forward(ids)).norm() == 0.0);
    CHECK(encoder::to_json(back.config()) == encoder::to_json(enc.config()));
    std::filesystem::remove(path);
}

TEST_CASE("sentinel handling for content windows") {
    const TokenSequence with{2, 7, 8}, without{7, 8};
    CHECK(encoder::with_sentinel(with, 2, 16, 0) == with);
    CHECK(encoder::with_sentinel(without, 2, 16, 1) == with);
    const TokenSequence big(16, 7);
    try {
        (void)encoder::with_sentinel(big, 2, 16, 3);
        FAIL("expected an error");
    } catch (const RuntimeError& e) {
        CHECK(std::string(e.what()).find("chunk 3") != std::string::npos);
    }
}

TEST_CASE("feature assembly layout and padding") {
    encoder::FeatureLayout layout{4, 3, 1};
    CHECK(layout.dim() == 16);
    CHECK(encoder::FeatureLayout{}.dim() == 3841);
    const std::vector<Vector> content{Vector::Constant(3, 1.0), Vector::Constant(3, 2.0)};
    const auto f = encoder::assemble_features(content, Vector::Constant(3, 5.0), {9.0}, layout);
    CHECK(f.values.size() == 16);
    CHECK(f.values.segment(0, 3) == Vector::Constant(3, 1.0));
    CHECK(f.values.segment(3, 3) == Vector::Constant(3, 2.0));
    CHECK(f.values.segment(6, 6).isZero(0.0));
    CHECK(f.values.segment(12, 3) == Vector::Constant(3, 5.0));
    CHECK(f.values(15) == 9.0);
    CHECK_THROWS_AS(encoder::assemble_features(content, Vector::Zero(2), {1.0}, layout), RuntimeError);
    CHECK_THROWS_AS(encoder::assemble_features(std::vector<Vector>(5, Vector::Zero(3)), Vector::Zero(3), {1.0}, layout),
                    RuntimeError);
}
