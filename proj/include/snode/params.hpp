#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "snode/common.hpp"

namespace snode {

/// Flat parameter vector with named matrix segments. Registration order fixes
/// the flat layout, so checkpoints and optimizer state are reproducible across
/// runs as long as segments are registered in the same order. Each segment is
/// stored column-major within its slice.
class ParamStore {
public:
    struct Segment {
        std::string name;
        int offset = 0;
        int rows = 0;
        int cols = 0;
        int size() const { return rows * cols; }
    };

    int add(const std::string& name, int rows, int cols) {
        require(rows >= 1 && cols >= 1, "ParamStore::add: dimensions must be positive");
        require(index_.find(name) == index_.end(),
                "ParamStore::add: duplicate segment '" + name + "'");
        Segment s;
        s.name = name;
        s.offset = static_cast<int>(flat_.size());
        s.rows = rows;
        s.cols = cols;
        index_[name] = static_cast<int>(segments_.size());
        segments_.push_back(s);
        flat_.conservativeResize(flat_.size() + rows * cols);
        flat_.tail(rows * cols).setZero();
        return static_cast<int>(segments_.size()) - 1;
    }

    bool has(const std::string& name) const { return index_.find(name) != index_.end(); }

    int index_of(const std::string& name) const { return seg_index(name); }

    const Segment& segment(const std::string& name) const { return segments_[seg_index(name)]; }
    const Segment& segment(int i) const { return segments_[i]; }
    int n_segments() const { return static_cast<int>(segments_.size()); }
    const std::vector<Segment>& segments() const { return segments_; }

    Eigen::Map<MatrixXd> matrix(const std::string& name) {
        const Segment& s = segments_[seg_index(name)];
        return {flat_.data() + s.offset, s.rows, s.cols};
    }

    Eigen::Map<const MatrixXd> matrix(const std::string& name) const {
        const Segment& s = segments_[seg_index(name)];
        return {flat_.data() + s.offset, s.rows, s.cols};
    }

    MatrixXd value(int i) const {
        const Segment& s = segments_[i];
        return Eigen::Map<const MatrixXd>(flat_.data() + s.offset, s.rows, s.cols);
    }

    double scalar(const std::string& name) const {
        const Segment& s = segments_[seg_index(name)];
        require(s.size() == 1, "ParamStore::scalar: segment '" + name + "' is not 1x1");
        return flat_[s.offset];
    }

    void set_scalar(const std::string& name, double v) {
        const Segment& s = segments_[seg_index(name)];
        require(s.size() == 1, "ParamStore::scalar: segment '" + name + "' is not 1x1");
        flat_[s.offset] = v;
    }

    int size() const { return static_cast<int>(flat_.size()); }
    const VectorXd& flat() const { return flat_; }

    void set_flat(const VectorXd& v) {
        require(v.size() == flat_.size(), "ParamStore::set_flat: size mismatch");
        flat_ = v;
    }

private:
    int seg_index(const std::string& name) const {
        auto it = index_.find(name);
        require(it != index_.end(), "ParamStore: unknown segment '" + name + "'");
        return it->second;
    }

    std::vector<Segment> segments_;
    std::unordered_map<std::string, int> index_;
    VectorXd flat_;
};

/// Loss value plus gradient aligned with the owning ParamStore's flat layout.
struct GradResult {
    double loss = 0;
    VectorXd grads;
};

}  // namespace snode
