#include "chronoqa/params.hpp"

#include "chronoqa/errors.hpp"

namespace chronoqa {

Param& ParamStore::create(const std::string& name, Tensor init) {
    if (index_.count(name) > 0) {
        throw ContractError("param store: duplicate parameter name '" + name + "'");
    }
    index_[name] = items_.size();
    items_.push_back(std::make_unique<Param>(name, std::move(init)));
    return *items_.back();
}

Param& ParamStore::get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw LookupError("param store: unknown parameter '" + name + "'");
    return *items_[it->second];
}

const Param& ParamStore::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw LookupError("param store: unknown parameter '" + name + "'");
    return *items_[it->second];
}

void ParamStore::zero_grads() {
    for (auto& p : items_) p->grad.fill(0.0);
}

size_t ParamStore::scalar_count() const {
    size_t n = 0;
    for (const auto& p : items_) n += p->value.size();
    return n;
}

}  // namespace chronoqa
