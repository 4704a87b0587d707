#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "vwapx/checkpoint.hpp"
#include "vwapx/graph.hpp"
#include "vwapx/layers.hpp"
#include "vwapx/optim.hpp"
#include "vwapx/selftest.hpp"

using namespace vwapx;
using namespace vwapx::nn;

TEST_CASE("softmax of zeros is uniform; rows sum to one") {
    Graph g;
    Value x = g.constant(Tensor(3, 7, 0.0));
    const Tensor& y = softmax(g, x).val();
    for (int64_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(1.0 / 7));
    Rng rng(2);
    Tensor r(5, 21);
    for (int64_t i = 0; i < r.size(); ++i) r[i] = 10.0 * rng.normal();
    Graph g2;
    const Tensor& s = softmax(g2, g2.constant(r)).val();
    for (int64_t i = 0; i < s.rows(); ++i) {
        double sum = 0.0;
        for (int64_t j = 0; j < s.cols(); ++j) {
            CHECK(s.at(i, j) >= 0.0);
            sum += s.at(i, j);
        }
        CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("lstm_cell fixed point at zero") {
    ParamStore store;
    store.create("l.Wx", Tensor(6, 20, 0.0));
    store.create("l.Wh", Tensor(5, 20, 0.0));
    store.create("l.b", Tensor(1, 20, 0.0));
    Graph g;
    auto st = lstm_cell(g, g.constant(Tensor(2, 6, 0.0)),
                        {g.constant(Tensor(2, 5, 0.0)), g.constant(Tensor(2, 5, 0.0))},
                        lstm_weights(g, store, "l"));
    for (int64_t i = 0; i < st.h.val().size(); ++i) {
        CHECK(st.h.val()[i] == 0.0);
        CHECK(st.c.val()[i] == 0.0);
    }
}

TEST_CASE("attention with one dominant key returns its value row") {
    // single head, identity-like projections, a query matching key 1 at scale
    const int64_t d = 4;
    ParamStore store;
    auto identity = [&](const std::string& name) {
        Tensor w(d, d, 0.0);
        for (int64_t i = 0; i < d; ++i) w.at(i, i) = 1.0;
        store.create(name + ".W", std::move(w));
        store.create(name + ".b", Tensor(1, d, 0.0));
    };
    identity("m.q");
    identity("m.k");
    identity("m.v");
    identity("m.o");
    const double s = 60.0; // large scale so softmax saturates
    Tensor q(1, d, 0.0), k(3, d, 0.0), v(3, d, 0.0);
    q.at(0, 1) = s;
    k.at(0, 0) = s;
    k.at(1, 1) = s; // matches the query
    k.at(2, 2) = s;
    for (int64_t i = 0; i < 3; ++i)
        for (int64_t j = 0; j < d; ++j) v.at(i, j) = static_cast<double>(10 * i + j);
    Graph g;
    const Tensor& out = multi_head_attention(g, g.constant(q), g.constant(k), g.constant(v),
                                             mha_weights(g, store, "m"), 1, nullptr)
                            .val();
    for (int64_t j = 0; j < d; ++j)
        CHECK(out.at(0, j) == doctest::Approx(v.at(1, j)).epsilon(1e-9));
}

TEST_CASE("backward basics") {
    SUBCASE("loss = sum(W x): grad W broadcasts x") {
        ParamStore store;
        store.create("W", Tensor(3, 2, 0.5));
        Tensor x(4, 3);
        for (int64_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) * 0.25;
        Graph g;
        Value y = g.matmul(g.constant(x), g.param(store, "W"));
        g.backward(g.sum_all(y));
        // dW[i,j] = sum_rows x[:, i]
        for (int64_t i = 0; i < 3; ++i) {
            double colsum = 0.0;
            for (int64_t r = 0; r < 4; ++r) colsum += x.at(r, i);
            for (int64_t j = 0; j < 2; ++j)
                CHECK(store.get("W").grad.at(i, j) == doctest::Approx(colsum));
        }
    }
    SUBCASE("unreachable parameters get zero gradient") {
        ParamStore store;
        store.create("used", Tensor(1, 1, 2.0));
        store.create("unused", Tensor(1, 1, 3.0));
        Graph g;
        Value loss = g.square_(g.param(store, "used"));
        g.backward(loss);
        CHECK(store.get("used").grad[0] == doctest::Approx(4.0));
        CHECK(store.get("unused").grad[0] == 0.0);
    }
    SUBCASE("backward on a non-scalar throws") {
        Graph g;
        Value x = g.constant(Tensor(2, 2, 1.0));
        CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
    }
    SUBCASE("double backward doubles accumulated gradients") {
        ParamStore store;
        store.create("w", Tensor(2, 2, 1.5));
        Graph g;
        Value loss = g.mean_all(g.square_(g.param(store, "w")));
        g.backward(loss);
        const double g1 = store.get("w").grad[0];
        g.backward(loss);
        CHECK(store.get("w").grad[0] == 2.0 * g1);
    }
}

TEST_CASE("shape mismatches raise descriptive errors") {
    Graph g;
    Value a = g.constant(Tensor(2, 3, 1.0));
    Value b = g.constant(Tensor(2, 4, 1.0));
    CHECK_THROWS_WITH_AS(g.matmul(a, b), doctest::Contains("matmul"), std::invalid_argument);
    CHECK_THROWS_AS(g.add(a, b), std::invalid_argument);
    CHECK_THROWS_AS(g.mul(a, b), std::invalid_argument);
}

TEST_CASE("adam and the annealing schedule") {
    SUBCASE("lr = 0 leaves parameters bit-identical") {
        ParamStore store;
        Rng rng(5);
        store.create("w", uniform_init(4, 4, 4, rng));
        Tensor before = store.get("w").value;
        for (int64_t i = 0; i < store.get("w").grad.size(); ++i)
            store.get("w").grad[i] = rng.normal();
        adam_step(store, 0.0);
        for (int64_t i = 0; i < before.size(); ++i)
            CHECK(store.get("w").value[i] == before[i]);
    }
    SUBCASE("descends a quadratic") {
        ParamStore store;
        store.create("w", Tensor(1, 1, 5.0));
        for (int it = 0; it < 2000; ++it) {
            store.zero_grad();
            Graph g;
            Value loss = g.square_(g.param(store, "w"));
            g.backward(loss);
            adam_step(store, 1e-2);
        }
        CHECK(std::fabs(store.get("w").value[0]) < 1e-2);
    }
    SUBCASE("linear anneal endpoints match Table-4 schedules") {
        CHECK(linear_anneal(5e-5, 1e-5, 0, 1000) == doctest::Approx(5e-5));
        CHECK(linear_anneal(5e-5, 1e-5, 1000, 1000) == doctest::Approx(1e-5));
        CHECK(linear_anneal(5e-5, 1e-5, 2000, 1000) == doctest::Approx(1e-5)); // clamped
        CHECK(linear_anneal(1e-3, 2e-4, 500, 1000) == doctest::Approx(6e-4));  // midpoint
    }
    SUBCASE("gradient clipping caps the global norm") {
        ParamStore store;
        store.create("a", Tensor(2, 2, 0.0));
        store.create("b", Tensor(1, 3, 0.0));
        for (auto& [name, e] : store.entries)
            for (int64_t i = 0; i < e.grad.size(); ++i) e.grad[i] = 3.0;
        clip_grad_norm(store, 0.5);
        CHECK(global_grad_norm(store) == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("checkpoint container round-trips bit-exactly") {
    const std::string dir = testutil::temp_dir("ckpt");
    Checkpoint ckpt;
    Rng rng(17);
    Tensor t(7, 5);
    for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
    ckpt.tensors["x/w"] = t;
    ckpt.put_scalar("meta/iter", 12345.0);
    ckpt.blobs["rng"] = std::string("\x00\x01\xff binary", 10);
    const std::string path = dir + "/c.bin";
    save_checkpoint(path, ckpt);
    const Checkpoint back = load_checkpoint(path);
    REQUIRE(back.tensors.count("x/w") == 1);
    const Tensor& bt = back.tensors.at("x/w");
    REQUIRE(bt.rows() == 7);
    for (int64_t i = 0; i < t.size(); ++i) CHECK(bt[i] == t[i]);
    CHECK(back.scalar("meta/iter") == 12345.0);
    CHECK(back.blobs.at("rng") == ckpt.blobs.at("rng"));

    SUBCASE("store round trip preserves Adam state") {
        ParamStore store;
        store.create("w", uniform_init(3, 3, 3, rng));
        for (int64_t i = 0; i < 9; ++i) store.get("w").grad[i] = rng.normal();
        adam_step(store, 1e-3);
        Checkpoint c2;
        store_to_checkpoint(store, "p/", c2);
        save_checkpoint(path, c2);
        ParamStore restored;
        Rng scratch(0);
        restored.create("w", uniform_init(3, 3, 3, scratch));
        store_from_checkpoint(restored, "p/", load_checkpoint(path));
        CHECK(restored.adam_step_count == store.adam_step_count);
        for (int64_t i = 0; i < 9; ++i) {
            CHECK(restored.get("w").value[i] == store.get("w").value[i]);
            CHECK(restored.get("w").m[i] == store.get("w").m[i]);
            CHECK(restored.get("w").v[i] == store.get("w").v[i]);
        }
    }
    SUBCASE("corrupt magic rejected") {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        os << "not a checkpoint";
        os.close();
        CHECK_THROWS(load_checkpoint(path));
    }
}

TEST_CASE("per-op finite differences (selftest gradient suite)") {
    const auto r = selftest::gradient_ops();
    INFO(r.detail);
    CHECK(r.passed);
}

TEST_CASE("rng serialization resumes the exact stream") {
    Rng a(991);
    for (int i = 0; i < 100; ++i) a.normal();
    const std::string state = a.serialize();
    Rng b = Rng::deserialize(state);
    for (int i = 0; i < 100; ++i) CHECK(a.normal() == b.normal());
}
