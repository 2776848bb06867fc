#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "snode/dataset_io.hpp"
#include "snode/linalg.hpp"
#include "snode/rng.hpp"
#include "snode/types.hpp"

using namespace snode;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path temp_dir(const std::string& tag) {
    fs::path p = fs::temp_directory_path() / ("snode_test_" + tag);
    fs::remove_all(p);
    return p;
}

Dataset tiny_dataset(bool with_gt) {
    MatrixXd coords(6, 2);
    coords << 0, 0, 1, 0, 0, 1, 1, 1, 0.5, 0.5, 0.25, 0.75;
    Dataset ds;
    ds.full_grid = CoordSet(coords);
    ds.sensor_indices = {1, 4};
    ds.sensor_set = ds.full_grid.subset(ds.sensor_indices);
    ds.grid_shape = {2, 3};
    ds.dt = 0.5;
    ds.times = {0.0, 0.5, 1.0};
    rng::Stream rs(11);
    for (int k = 0; k < 3; ++k) {
        VectorXcd obs(2), tru(6);
        for (int i = 0; i < 2; ++i) obs[i] = Complex(rs.normal(), rs.normal());
        for (int i = 0; i < 6; ++i) tru[i] = Complex(rs.normal(), rs.normal());
        ds.observations.push_back(Field(obs, ds.times[k]));
        ds.truth.push_back(Field(tru, ds.times[k]));
    }
    ds.meta.system = "synthetic";
    ds.meta.seed = 11;
    ds.meta.noise_sigma = 0.1;
    ds.meta.sensor_frac = 2.0 / 6.0;
    if (with_gt) {
        Spectrum sp;
        sp.lambdas = VectorXcd(2);
        sp.lambdas << Complex(-0.1, 2.0), Complex(-0.2, 1.0);
        sp.mus = VectorXcd(2);
        for (int k = 0; k < 2; ++k) sp.mus[k] = std::exp(sp.lambdas[k] * ds.dt);
        sp.modes = MatrixXcd(6, 2);
        for (int i = 0; i < 6; ++i)
            for (int k = 0; k < 2; ++k) sp.modes(i, k) = Complex(rs.normal(), rs.normal());
        ds.gt_spectrum = sp;
        ds.gt_amplitudes = VectorXcd(2);
        ds.gt_amplitudes << Complex(1.0, 0.5), Complex(0.25, -0.125);
    }
    ds.validate();
    return ds;
}

}  // namespace

TEST_CASE("keyed rng streams are deterministic and key-separated", "[fast][core]") {
    rng::Stream a(42, 1, 2, 3), b(42, 1, 2, 3), c(42, 1, 2, 4);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 1000; ++i) {
        auto x = a.next_u64(), y = b.next_u64(), z = c.next_u64();
        all_equal = all_equal && (x == y);
        any_diff = any_diff || (x != z);
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("rng uniform stays in range and normal has sane moments", "[fast][core]") {
    rng::Stream s(7);
    double lo = 1e9, hi = -1e9;
    for (int i = 0; i < 10000; ++i) {
        double u = s.uniform(-2.0, 3.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo >= -2.0);
    CHECK(hi < 3.0);

    rng::Stream n(8);
    double sum = 0, sq = 0;
    const int N = 100000;
    for (int i = 0; i < N; ++i) {
        double z = n.normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / N, var = sq / N - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("rng below and shuffle are unbiased enough and deterministic", "[fast][core]") {
    rng::Stream s(3);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 50000; ++i) {
        auto k = s.below(5);
        REQUIRE(k < 5);
        ++counts[static_cast<int>(k)];
    }
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);

    std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7}, v2 = v1;
    rng::Stream t1(9, 1), t2(9, 1);
    t1.shuffle(v1);
    t2.shuffle(v2);
    CHECK(v1 == v2);
    std::vector<int> sorted = v1;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>({0, 1, 2, 3, 4, 5, 6, 7}));
}

TEST_CASE("coord sets reject duplicates and non-finite entries", "[fast][core]") {
    MatrixXd dup(2, 2);
    dup << 0.5, 0.5, 0.5, 0.5;
    CHECK_THROWS_AS(CoordSet(dup), InvalidArgument);

    MatrixXd bad(1, 2);
    bad << std::numeric_limits<double>::quiet_NaN(), 0.0;
    CHECK_THROWS_AS(CoordSet(bad), InvalidArgument);

    MatrixXd ok(3, 2);
    ok << 0, 0, 1, 0, 0, 1;
    CoordSet set(ok);
    CHECK(set.size() == 3);
    CHECK(set.dim() == 2);
    CoordSet sub = set.subset({2, 0});
    CHECK(sub.size() == 2);
    CHECK(sub.coords()(0, 1) == 1.0);
}

TEST_CASE("fields validate against their coord set", "[fast][core]") {
    MatrixXd ok(2, 2);
    ok << 0, 0, 1, 1;
    CoordSet set(ok);
    VectorXcd v(3);
    v.setZero();
    CHECK_THROWS_AS(Field::over(set, v, 0.0), InvalidArgument);
    VectorXcd w(2);
    w << Complex(1, 2), Complex(3, 4);
    Field f = Field::over(set, w, 1.5);
    CHECK(f.time == 1.5);
}

TEST_CASE("spectrum consistency ties discrete and continuous eigenvalues", "[fast][core]") {
    Spectrum sp;
    sp.lambdas = VectorXcd(2);
    sp.lambdas << Complex(-0.05, 4.0), Complex(-0.2, 1.0);
    sp.mus = VectorXcd(2);
    const double dt = 0.1;
    for (int k = 0; k < 2; ++k) sp.mus[k] = std::exp(sp.lambdas[k] * dt);
    sp.modes = MatrixXcd::Identity(4, 2);
    CHECK(sp.consistent(dt));
    sp.mus[1] *= 1.001;
    CHECK_FALSE(sp.consistent(dt));
}

TEST_CASE("complex svd matches hand-checkable cases", "[fast][core]") {
    SECTION("identity") {
        SvdResult r = complex_svd(MatrixXcd::Identity(3, 3));
        REQUIRE(r.sigma.size() == 3);
        for (int i = 0; i < 3; ++i) CHECK(r.sigma[i] == Catch::Approx(1.0).margin(1e-12));
    }
    SECTION("rank-1 outer product") {
        rng::Stream s(5);
        VectorXcd a(4), b(3);
        for (int i = 0; i < 4; ++i) a[i] = Complex(s.normal(), s.normal());
        for (int i = 0; i < 3; ++i) b[i] = Complex(s.normal(), s.normal());
        MatrixXcd M = a * b.adjoint();
        SvdResult r = complex_svd(M);
        CHECK(r.sigma[0] == Catch::Approx(a.norm() * b.norm()).epsilon(1e-10));
        for (int i = 1; i < r.sigma.size(); ++i) CHECK(std::abs(r.sigma[i]) < 1e-10);
    }
    SECTION("random 8x6 reconstructs and factors are orthonormal") {
        rng::Stream s(6);
        MatrixXcd M(8, 6);
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 6; ++j) M(i, j) = Complex(s.normal(), s.normal());
        SvdResult r = complex_svd(M);
        MatrixXcd rec = r.U * r.sigma.asDiagonal() * r.V.adjoint();
        CHECK((rec - M).norm() < 1e-9);
        CHECK((r.U.adjoint() * r.U - MatrixXcd::Identity(6, 6)).norm() < 1e-10);
        CHECK((r.V.adjoint() * r.V - MatrixXcd::Identity(6, 6)).norm() < 1e-10);
        for (int i = 1; i < r.sigma.size(); ++i) CHECK(r.sigma[i - 1] >= r.sigma[i]);
    }
}

TEST_CASE("hermitian psd projection clamps only what it must", "[fast][core]") {
    SECTION("psd input is untouched") {
        rng::Stream s(12);
        MatrixXcd B(3, 3);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) B(i, j) = Complex(s.normal(), s.normal());
        MatrixXcd psd = B * B.adjoint();
        MatrixXcd out = hermitian_psd_project(psd);
        CHECK((out - psd).norm() <= 1e-12 * psd.norm());
    }
    SECTION("slightly indefinite diagonal is clamped") {
        MatrixXcd M = MatrixXcd::Zero(2, 2);
        M(0, 0) = 1.0;
        M(1, 1) = -1e-8;
        MatrixXcd out = hermitian_psd_project(M);
        CHECK(std::abs(out(0, 0) - Complex(1.0, 0.0)) < 1e-14);
        CHECK(std::abs(out(1, 1)) < 1e-15);
    }
    SECTION("random hermitian becomes psd") {
        rng::Stream s(13);
        MatrixXcd H(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) H(i, j) = Complex(s.normal(), s.normal());
        H = (H + H.adjoint()).eval();
        MatrixXcd out = hermitian_psd_project(H);
        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(out);
        CHECK(es.eigenvalues().minCoeff() >= -1e-12);
    }
}

TEST_CASE("symmetric psd helpers work on the real lift", "[fast][core]") {
    rng::Stream s(14);
    MatrixXd B(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) B(i, j) = s.normal();
    MatrixXd psd = B * B.transpose();
    CHECK((symmetric_psd_project(psd) - psd).norm() <= 1e-12 * psd.norm());
    MatrixXd root = symmetric_sqrt(psd);
    CHECK((root * root - psd).norm() < 1e-9 * psd.norm());
}

TEST_CASE("datasets survive a save/load round trip byte for byte", "[fast][core]") {
    for (bool with_gt : {false, true}) {
        Dataset ds = tiny_dataset(with_gt);
        fs::path d1 = temp_dir(with_gt ? "ds_gt_a" : "ds_a");
        fs::path d2 = temp_dir(with_gt ? "ds_gt_b" : "ds_b");
        io::save_dataset(ds, d1);
        Dataset back = io::load_dataset(d1);
        io::save_dataset(back, d2);

        CHECK(back.meta.system == ds.meta.system);
        CHECK(back.meta.seed == ds.meta.seed);
        CHECK(back.dt == ds.dt);
        CHECK(back.sensor_indices == ds.sensor_indices);
        CHECK(back.grid_shape == ds.grid_shape);
        REQUIRE(back.observations.size() == ds.observations.size());
        for (std::size_t k = 0; k < ds.observations.size(); ++k) {
            CHECK(back.observations[k].values == ds.observations[k].values);
            CHECK(back.observations[k].time == ds.observations[k].time);
        }
        REQUIRE(back.truth.size() == ds.truth.size());
        CHECK(back.has_truth());
        CHECK(back.gt_spectrum.has_value() == with_gt);
        if (with_gt) {
            CHECK(back.gt_spectrum->lambdas == ds.gt_spectrum->lambdas);
            CHECK(back.gt_spectrum->modes == ds.gt_spectrum->modes);
            CHECK(back.gt_amplitudes == ds.gt_amplitudes);
        }

        for (const auto& entry : fs::directory_iterator(d1)) {
            const fs::path other = d2 / entry.path().filename();
            REQUIRE(fs::exists(other));
            CHECK(slurp(entry.path()) == slurp(other));
        }
        fs::remove_all(d1);
        fs::remove_all(d2);
    }
}

TEST_CASE("manifest reader rejects malformed inputs", "[fast][core]") {
    fs::path dir = temp_dir("bad_manifest");
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "manifest.json");
        out << "{ not json";
    }
    CHECK_THROWS_AS(io::ManifestReader(dir), IoError);

    // Valid manifest pointing at a truncated payload.
    {
        std::ofstream out(dir / "manifest.json");
        out << R"({"version":1,"arrays":{"x":{"file":"x.bin","shape":[2,2],"complex":false}}})";
        std::ofstream bin(dir / "x.bin", std::ios::binary);
        double one = 1.0;
        bin.write(reinterpret_cast<const char*>(&one), sizeof(one));
    }
    io::ManifestReader r(dir);
    CHECK_THROWS_AS(r.read_real("x"), IoError);
    CHECK_THROWS_AS(r.read_real("missing"), IoError);
    fs::remove_all(dir);
}
