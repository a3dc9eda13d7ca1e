#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "mapnn/autodiff.hpp"

namespace mapnn {

template <typename Scalar>
using GradientMap = std::map<std::string, Tensor<Scalar>>;

/// Named, ordered set of trainable tensors. Each name is bound once; lookups
/// of unknown names throw rather than creating entries. Not copyable: two
/// stores never alias the same parameters by accident. Use clone() for an
/// independent deep copy.
template <typename Scalar>
class ParamStore {
public:
    ParamStore() = default;
    ParamStore(ParamStore&&) noexcept = default;
    ParamStore& operator=(ParamStore&&) noexcept = default;
    ParamStore(const ParamStore&) = delete;
    ParamStore& operator=(const ParamStore&) = delete;

    void bind(const std::string& name, Tensor<Scalar> value) {
        if (index_.count(name)) throw InvalidArgument("ParamStore: parameter '" + name + "' already bound");
        index_.emplace(name, vars_.size());
        names_.push_back(name);
        vars_.push_back(ad::Var<Scalar>::leaf(std::move(value), true));
    }

    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    const ad::Var<Scalar>& at(const std::string& name) const { return vars_[lookup(name)]; }
    ad::Var<Scalar>& at(const std::string& name) { return vars_[lookup(name)]; }

    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::vector<ad::Var<Scalar>>& vars() const noexcept { return vars_; }
    std::size_t size() const noexcept { return vars_.size(); }

    Index parameter_count() const {
        Index n = 0;
        for (const auto& v : vars_) n += v.value().size();
        return n;
    }

    ParamStore clone() const {
        ParamStore copy;
        for (std::size_t i = 0; i < vars_.size(); ++i) copy.bind(names_[i], vars_[i].value());
        return copy;
    }

    template <typename Other>
    ParamStore<Other> cast() const {
        ParamStore<Other> out;
        for (std::size_t i = 0; i < vars_.size(); ++i) out.bind(names_[i], vars_[i].value().template cast<Other>());
        return out;
    }

private:
    std::size_t lookup(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw InvalidArgument("ParamStore: unknown parameter '" + name + "'");
        return it->second;
    }

    std::vector<std::string> names_;
    std::vector<ad::Var<Scalar>> vars_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Gradients of a scalar root for every parameter in the store; parameters
/// the root does not depend on map to zeros.
template <typename Scalar>
GradientMap<Scalar> backward(const ad::Var<Scalar>& root, const ParamStore<Scalar>& params) {
    std::vector<ad::Var<Scalar>> grads = ad::grad(root, params.vars());
    GradientMap<Scalar> out;
    for (std::size_t i = 0; i < grads.size(); ++i) out.emplace(params.names()[i], grads[i].value());
    return out;
}

}  // namespace mapnn
