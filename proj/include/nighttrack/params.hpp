#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nighttrack/tensor.hpp"

namespace nighttrack {

enum class ParamTag { backbone, head, dcp, gfa };

const char* tag_name(ParamTag tag);
ParamTag tag_from_name(const std::string& name);

struct Param {
    std::string name;
    Tensor value;
    ParamTag tag = ParamTag::backbone;
    bool frozen = false;
};

// name -> grad values, for exactly the trainable parameters.
using GradMap = std::map<std::string, std::vector<double>>;

// Ordered, uniquely named parameter collection. Registry order is the
// checkpoint payload order, so it must be deterministic.
class ModelParams {
public:
    Tensor& add(const std::string& name, Tensor value, ParamTag tag, bool frozen = false);

    bool has(const std::string& name) const;
    const Param& at(const std::string& name) const;
    Param& at(const std::string& name);
    Tensor tensor(const std::string& name) const;

    std::vector<Param>& all() { return params_; }
    const std::vector<Param>& all() const { return params_; }
    size_t size() const { return params_.size(); }

    void zero_grad();

    // frozen => requires_grad false. Enabled=false turns off grad tracking
    // for everything (evaluation mode).
    void set_grad_enabled(bool enabled);
    void freeze_tags(const std::vector<ParamTag>& tags, bool frozen);

    // Grads of all trainable parameters. A gradient on a frozen parameter is
    // a FreezeViolation; a trainable parameter without a gradient raises
    // ContractError (the step would silently skip it otherwise).
    GradMap collect_grads() const;

    struct Counts {
        int64_t total = 0;
        int64_t selected = 0;
        std::map<std::string, int64_t> by_tag;
        double fraction() const {
            return total > 0 ? static_cast<double>(selected) / static_cast<double>(total) : 0.0;
        }
    };
    // Counts parameters; `selected` tallies those matching the predicate
    // (default: trainable, i.e. not frozen).
    Counts count(const std::function<bool(const Param&)>& pred = {}) const;

private:
    std::vector<Param> params_;
    std::map<std::string, size_t> index_;
};

// Reference ratio for a full-scale instantiation of this architecture,
// reported alongside the desk-scale numbers for context.
constexpr double kReferenceTrainableParams = 3.03e6;
constexpr double kReferenceTotalParams = 89.96e6;

}  // namespace nighttrack
