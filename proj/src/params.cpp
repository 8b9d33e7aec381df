#include "nighttrack/params.hpp"

namespace nighttrack {

const char* tag_name(ParamTag tag) {
    switch (tag) {
        case ParamTag::backbone: return "backbone";
        case ParamTag::head: return "head";
        case ParamTag::dcp: return "dcp";
        case ParamTag::gfa: return "gfa";
    }
    return "?";
}

ParamTag tag_from_name(const std::string& name) {
    if (name == "backbone") return ParamTag::backbone;
    if (name == "head") return ParamTag::head;
    if (name == "dcp") return ParamTag::dcp;
    if (name == "gfa") return ParamTag::gfa;
    throw ContractError("unknown parameter tag: " + name);
}

Tensor& ModelParams::add(const std::string& name, Tensor value, ParamTag tag, bool frozen) {
    if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
    value.set_requires_grad(!frozen);
    index_[name] = params_.size();
    params_.push_back(Param{name, std::move(value), tag, frozen});
    return params_.back().value;
}

bool ModelParams::has(const std::string& name) const { return index_.count(name) > 0; }

const Param& ModelParams::at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return params_[it->second];
}

Param& ModelParams::at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return params_[it->second];
}

Tensor ModelParams::tensor(const std::string& name) const { return at(name).value; }

void ModelParams::zero_grad() {
    for (auto& p : params_) p.value.zero_grad();
}

void ModelParams::set_grad_enabled(bool enabled) {
    for (auto& p : params_) p.value.set_requires_grad(enabled && !p.frozen);
}

void ModelParams::freeze_tags(const std::vector<ParamTag>& tags, bool frozen) {
    for (auto& p : params_) {
        for (ParamTag t : tags) {
            if (p.tag == t) {
                p.frozen = frozen;
                p.value.set_requires_grad(!frozen);
            }
        }
    }
}

GradMap ModelParams::collect_grads() const {
    GradMap grads;
    for (const auto& p : params_) {
        if (p.frozen) {
            if (p.value.has_grad()) {
                throw FreezeViolation("gradient accumulated on frozen parameter " + p.name);
            }
            continue;
        }
        if (!p.value.has_grad()) {
            throw ContractError("trainable parameter " + p.name + " received no gradient");
        }
        grads[p.name] = p.value.grad();
    }
    return grads;
}

ModelParams::Counts ModelParams::count(const std::function<bool(const Param&)>& pred) const {
    Counts c;
    for (const auto& p : params_) {
        const int64_t n = p.value.numel();
        c.total += n;
        c.by_tag[tag_name(p.tag)] += n;
        const bool sel = pred ? pred(p) : !p.frozen;
        if (sel) c.selected += n;
    }
    return c;
}

}  // namespace nighttrack
