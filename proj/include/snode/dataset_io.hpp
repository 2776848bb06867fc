#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "snode/types.hpp"

namespace snode {
namespace io {

namespace fs = std::filesystem;
using nlohmann::json;

// Arrays are stored as raw little-endian float64, row major, real/imag
// interleaved per complex entry. The JSON manifest carries shapes, so the
// round trip is bit exact with no third-party container format.

inline void write_doubles(const fs::path& path, const std::vector<double>& data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for write: " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(double)));
    if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<double> read_doubles(const fs::path& path, std::size_t expect_count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for read: " + path.string());
    in.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != expect_count * sizeof(double)) {
        throw IoError("array size mismatch for " + path.string() + ": manifest expects " +
                      std::to_string(expect_count * sizeof(double)) + " bytes, file has " +
                      std::to_string(bytes));
    }
    in.seekg(0);
    std::vector<double> data(expect_count);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw IoError("read failed: " + path.string());
    return data;
}

inline std::vector<double> flatten_real(const MatrixXd& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
    return out;
}

inline std::vector<double> flatten_complex(const MatrixXcd& m) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(2 * m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out.push_back(m(i, j).real());
            out.push_back(m(i, j).imag());
        }
    return out;
}

struct ArrayRef {
    std::string file;
    std::vector<Eigen::Index> shape;
    bool complex = false;
};

class ManifestWriter {
public:
    explicit ManifestWriter(fs::path dir) : dir_(std::move(dir)) {
        fs::create_directories(dir_);
    }

    void add_real(const std::string& name, const MatrixXd& m) {
        write_doubles(dir_ / (name + ".bin"), flatten_real(m));
        arrays_[name] = {name + ".bin", {m.rows(), m.cols()}, false};
    }

    void add_complex(const std::string& name, const MatrixXcd& m) {
        write_doubles(dir_ / (name + ".bin"), flatten_complex(m));
        arrays_[name] = {name + ".bin", {m.rows(), m.cols()}, true};
    }

    void finish(const json& header) {
        json man = header;
        json arrays = json::object();
        for (const auto& [name, ref] : arrays_) {
            arrays[name] = {{"file", ref.file}, {"shape", ref.shape}, {"complex", ref.complex}};
        }
        man["arrays"] = arrays;
        std::ofstream out(dir_ / "manifest.json", std::ios::trunc);
        if (!out) throw IoError("cannot write manifest in " + dir_.string());
        out << man.dump(2) << "\n";
    }

private:
    fs::path dir_;
    std::map<std::string, ArrayRef> arrays_;
};

class ManifestReader {
public:
    explicit ManifestReader(fs::path dir) : dir_(std::move(dir)) {
        std::ifstream in(dir_ / "manifest.json");
        if (!in) throw IoError("cannot open manifest in " + dir_.string());
        try {
            in >> man_;
        } catch (const json::exception& e) {
            throw IoError("malformed manifest in " + dir_.string() + ": " + e.what());
        }
    }

    const json& manifest() const { return man_; }
    bool has_array(const std::string& name) const {
        return man_.contains("arrays") && man_["arrays"].contains(name);
    }

    MatrixXd read_real(const std::string& name) const {
        const auto [file, shape, complex] = ref(name);
        if (complex) throw IoError("array " + name + " is complex, expected real");
        auto data = read_doubles(dir_ / file, static_cast<std::size_t>(shape[0] * shape[1]));
        MatrixXd m(shape[0], shape[1]);
        std::size_t k = 0;
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = data[k++];
        return m;
    }

    MatrixXcd read_complex(const std::string& name) const {
        const auto [file, shape, complex] = ref(name);
        if (!complex) throw IoError("array " + name + " is real, expected complex");
        auto data = read_doubles(dir_ / file, static_cast<std::size_t>(2 * shape[0] * shape[1]));
        MatrixXcd m(shape[0], shape[1]);
        std::size_t k = 0;
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                const double re = data[k++];
                const double im = data[k++];
                m(i, j) = Complex(re, im);
            }
        return m;
    }

private:
    struct Ref {
        std::string file;
        std::array<Eigen::Index, 2> shape;
        bool complex;
    };

    Ref ref(const std::string& name) const {
        if (!has_array(name)) throw IoError("manifest has no array named " + name);
        const auto& a = man_["arrays"][name];
        try {
            std::vector<Eigen::Index> shape = a.at("shape").get<std::vector<Eigen::Index>>();
            if (shape.size() != 2) throw IoError("array " + name + ": expected 2-d shape");
            return {a.at("file").get<std::string>(), {shape[0], shape[1]},
                    a.at("complex").get<bool>()};
        } catch (const json::exception& e) {
            throw IoError("malformed array entry " + name + ": " + e.what());
        }
    }

    fs::path dir_;
    json man_;
};

/// Writes manifest.json plus one binary file per array.
inline void save_dataset(const Dataset& ds, const fs::path& dir) {
    ds.validate();
    ManifestWriter w(dir);

    w.add_real("coords", ds.full_grid.coords());

    MatrixXcd obs(static_cast<Eigen::Index>(ds.observations.size()), ds.n_sensors());
    for (std::size_t k = 0; k < ds.observations.size(); ++k)
        obs.row(static_cast<Eigen::Index>(k)) = ds.observations[k].values.transpose();
    w.add_complex("obs", obs);

    if (ds.has_truth()) {
        MatrixXcd truth(static_cast<Eigen::Index>(ds.truth.size()), ds.n_grid());
        for (std::size_t k = 0; k < ds.truth.size(); ++k)
            truth.row(static_cast<Eigen::Index>(k)) = ds.truth[k].values.transpose();
        w.add_complex("truth", truth);
    }

    if (ds.gt_spectrum) {
        w.add_complex("gt_lambdas", ds.gt_spectrum->lambdas);
        w.add_complex("gt_mus", ds.gt_spectrum->mus);
        w.add_complex("gt_modes", ds.gt_spectrum->modes);
        if (ds.gt_amplitudes.size() > 0) w.add_complex("gt_amplitudes", ds.gt_amplitudes);
    }

    json header = {
        {"version", 1},
        {"system", ds.meta.system},
        {"seed", ds.meta.seed},
        {"dt", ds.dt},
        {"times", ds.times},
        {"grid_shape", ds.grid_shape},
        {"sensor_indices", ds.sensor_indices},
        {"noise_sigma", ds.meta.noise_sigma},
        {"extra", {{"sensor_frac", ds.meta.sensor_frac}}},
    };
    w.finish(header);
}

inline Dataset load_dataset(const fs::path& dir) {
    ManifestReader r(dir);
    const json& man = r.manifest();

    Dataset ds;
    try {
        ds.meta.system = man.at("system").get<std::string>();
        ds.meta.seed = man.at("seed").get<std::uint64_t>();
        ds.dt = man.at("dt").get<double>();
        ds.times = man.at("times").get<std::vector<double>>();
        auto gs = man.at("grid_shape").get<std::vector<int>>();
        if (gs.size() != 2) throw IoError("grid_shape must have two entries");
        ds.grid_shape = {gs[0], gs[1]};
        ds.sensor_indices = man.at("sensor_indices").get<std::vector<int>>();
        ds.meta.noise_sigma = man.at("noise_sigma").get<double>();
        if (man.contains("extra") && man["extra"].contains("sensor_frac"))
            ds.meta.sensor_frac = man["extra"]["sensor_frac"].get<double>();
    } catch (const json::exception& e) {
        throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
    }

    ds.full_grid = CoordSet(r.read_real("coords"));
    ds.sensor_set = ds.full_grid.subset(ds.sensor_indices);

    const MatrixXcd obs = r.read_complex("obs");
    if (static_cast<std::size_t>(obs.rows()) != ds.times.size())
        throw IoError("obs rows do not match times");
    for (Eigen::Index k = 0; k < obs.rows(); ++k)
        ds.observations.push_back(Field(obs.row(k).transpose(), ds.times[k]));

    if (r.has_array("truth")) {
        const MatrixXcd truth = r.read_complex("truth");
        if (truth.rows() != obs.rows()) throw IoError("truth rows do not match obs");
        for (Eigen::Index k = 0; k < truth.rows(); ++k)
            ds.truth.push_back(Field(truth.row(k).transpose(), ds.times[k]));
    }

    if (r.has_array("gt_lambdas")) {
        Spectrum sp;
        sp.lambdas = r.read_complex("gt_lambdas").col(0);
        sp.mus = r.read_complex("gt_mus").col(0);
        sp.modes = r.read_complex("gt_modes");
        ds.gt_spectrum = std::move(sp);
        if (r.has_array("gt_amplitudes")) ds.gt_amplitudes = r.read_complex("gt_amplitudes").col(0);
    }

    ds.validate();
    return ds;
}

}  // namespace io
}  // namespace snode
