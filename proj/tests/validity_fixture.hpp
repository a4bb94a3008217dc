#pragma once

// Loader for the labeled program-validity suite in fixtures/validity_cases.json.

#include <cadloop/dsl.hpp>
#include <cadloop/util.hpp>

#include <json.hpp>

#include <string>
#include <vector>

#include "test_support.hpp"

namespace testsupport {

struct ValidityCase {
    std::string program;
    cadloop::dsl::ValidityReport::Reason expected;
};

inline const char* reason_name(cadloop::dsl::ValidityReport::Reason reason) {
    using Reason = cadloop::dsl::ValidityReport::Reason;
    switch (reason) {
        case Reason::ok: return "valid";
        case Reason::parse_error: return "parse_error";
        case Reason::range_error: return "range_error";
        case Reason::degenerate_solid: return "degenerate_solid";
    }
    return "?";
}

inline std::vector<ValidityCase> load_validity_cases() {
    using Reason = cadloop::dsl::ValidityReport::Reason;
    const auto doc =
        nlohmann::json::parse(cadloop::read_text_file(fixture_path("validity_cases.json")));
    std::vector<ValidityCase> cases;
    for (const auto& entry : doc.at("cases")) {
        ValidityCase c;
        c.program = entry.at("program").get<std::string>();
        const std::string label = entry.at("label").get<std::string>();
        if (label == "valid") c.expected = Reason::ok;
        else if (label == "parse_error") c.expected = Reason::parse_error;
        else if (label == "range_error") c.expected = Reason::range_error;
        else if (label == "degenerate_solid") c.expected = Reason::degenerate_solid;
        else throw std::runtime_error("unknown label: " + label);
        cases.push_back(std::move(c));
    }
    return cases;
}

}  // namespace testsupport
