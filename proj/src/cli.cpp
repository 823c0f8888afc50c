#include "parsec/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace parsec::cli {

namespace {

std::string trim(std::string_view s) {
    const auto* ws = " \t\r";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

class LineParser {
public:
    LineParser(const std::string& file, std::size_t line) : file_(file), line_(line) {}

    [[noreturn]] void fail(const std::string& message) const { throw ScenarioError(file_, line_, message); }

    std::uint64_t number(const std::string& text, const std::string& what) const {
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc() || ptr != text.data() + text.size())
            fail(what + " expects a non-negative integer, got '" + text + "'");
        return v;
    }

    bool boolean(const std::string& text, const std::string& what) const {
        if (text == "true" || text == "1" || text == "yes") return true;
        if (text == "false" || text == "0" || text == "no") return false;
        fail(what + " expects true or false, got '" + text + "'");
    }

private:
    const std::string& file_;
    std::size_t line_;
};

ByzantineBehavior parse_behavior(const std::vector<std::string>& w, const LineParser& p) {
    ByzantineBehavior b;
    const std::string& kind = w[1];
    auto arity = [&](std::size_t n) {
        if (w.size() != n) p.fail("byzantine " + kind + " takes " + std::to_string(n - 2) + " argument(s)");
    };
    if (kind == "silent") {
        arity(2);
        b.kind = ByzantineBehavior::Kind::silent;
    } else if (kind == "forker") {
        arity(3);
        b.kind = ByzantineBehavior::Kind::forker;
        b.fork_at = static_cast<std::uint32_t>(p.number(w[2], "forker"));
        if (b.fork_at == 0) p.fail("forker position must be at least 1");
    } else if (kind == "equivocator") {
        if (w.size() < 3) p.fail("equivocator needs at least one main/alternate payload pair");
        b.kind = ByzantineBehavior::Kind::equivocator;
        for (std::size_t i = 2; i < w.size(); ++i) {
            auto slash = w[i].find('/');
            if (slash == std::string::npos || slash == 0 || slash + 1 == w[i].size())
                p.fail("equivocator pair '" + w[i] + "' must look like main/alternate");
            b.pairs.emplace_back(w[i].substr(0, slash), w[i].substr(slash + 1));
        }
    } else if (kind == "withholder") {
        arity(2);
        b.kind = ByzantineBehavior::Kind::share_withholder;
    } else if (kind == "noise") {
        arity(2);
        b.kind = ByzantineBehavior::Kind::random_noise;
    } else {
        p.fail("unknown byzantine behavior '" + kind + "'");
    }
    return b;
}

std::filesystem::path resolve(const std::string& path, const Overrides& o) {
    std::filesystem::path p(path);
    if (p.is_absolute()) return p;
    std::string dir = ".";
    if (o.out_dir) {
        dir = *o.out_dir;
    } else if (const char* env = std::getenv("PARSEC_SIM_OUT_DIR"); env && *env) {
        dir = env;
    }
    return std::filesystem::path(dir) / p;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text;
    if (!f) throw std::runtime_error("write failed for " + path.string());
}

std::string traces(const RunReport& report) {
    std::string out;
    for (std::size_t i = 0; i < report.states.size(); ++i) {
        if (!report.states[i]) continue;
        out += "# node " + node_label(i) + "\n";
        for (const auto& line : report.states[i]->trace()) out += line + "\n";
    }
    return out;
}

std::optional<ScenarioFile> load_with_overrides(const std::string& path, const Overrides& o, std::ostream& err) {
    try {
        ScenarioFile sf = load_scenario(path);
        if (o.seed) sf.scenario.seed = *o.seed;
        if (o.steps) sf.scenario.step_budget = *o.steps;
        if (o.n) sf.scenario.n = *o.n;
        if (o.expect_failure_allowed) sf.scenario.expect_failure_allowed = true;
        sf.scenario.validate();
        return sf;
    } catch (const std::exception& ex) {
        err << ex.what() << "\n";
        return std::nullopt;
    }
}

}  // namespace

ScenarioFile parse_scenario(const std::string& text, const std::string& file_name) {
    ScenarioFile sf;
    SimScenario& sc = sf.scenario;
    std::set<std::string> seen;
    static const std::set<std::string> list_keys = {"byzantine", "vote", "add", "remove"};
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        LineParser p(file_name, line_no);
        std::string line = raw.substr(0, raw.find('#'));
        if (trim(line).empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) p.fail("expected key = value");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) p.fail("missing key before '='");
        if (value.empty()) p.fail("missing value for '" + key + "'");
        if (!list_keys.count(key) && !seen.insert(key).second) p.fail("duplicate key '" + key + "'");

        try {
            if (key == "name") {
                sc.name = value;
            } else if (key == "n") {
                sc.n = p.number(value, key);
            } else if (key == "seed") {
                sc.seed = p.number(value, key);
            } else if (key == "steps") {
                sc.step_budget = p.number(value, key);
            } else if (key == "policy") {
                sc.policy = parse_policy(value);
            } else if (key == "schedule") {
                sc.schedule = CoinSchedule::parse(value);
            } else if (key == "strategy") {
                make_strategy(value);
                sc.strategy = value;
            } else if (key == "starvation_bound") {
                sc.starvation_bound = p.number(value, key);
            } else if (key == "cadence") {
                sc.cadence = p.number(value, key);
            } else if (key == "settle_rounds") {
                sc.settle_rounds = p.number(value, key);
            } else if (key == "multi_block") {
                sc.multi_block = p.boolean(value, key);
            } else if (key == "expect_failure_allowed") {
                sc.expect_failure_allowed = p.boolean(value, key);
            } else if (key == "trace") {
                sf.trace_path = value;
            } else if (key == "dot") {
                sf.dot_path = value;
            } else if (key == "dot_node") {
                sf.dot_node = value;
            } else if (key == "report") {
                sf.report_path = value;
            } else if (key == "byzantine") {
                auto w = words(value);
                if (w.size() < 2) p.fail("byzantine expects '<index> <behavior> [args]'");
                auto idx = p.number(w[0], "byzantine index");
                if (!sc.byzantine.emplace(idx, parse_behavior(w, p)).second)
                    p.fail("node " + w[0] + " already has a byzantine behavior");
            } else if (key == "vote") {
                std::istringstream vs(value);
                std::string round, who;
                vs >> round >> who;
                std::string payload;
                std::getline(vs, payload);
                payload = trim(payload);
                if (payload.empty()) p.fail("vote expects '<round> <index|*> <payload>'");
                if (payload.rfind(membership_prefix, 0) == 0)
                    p.fail("payloads starting with '" + std::string(membership_prefix) + "' are reserved");
                VoteInjection v;
                v.round = p.number(round, "vote round");
                if (who != "*") v.node = p.number(who, "vote node");
                v.payload = payload;
                sc.votes.push_back(std::move(v));
            } else if (key == "add") {
                auto w = words(value);
                if (w.size() != 1) p.fail("add expects '<round>'");
                sc.membership.push_back({p.number(w[0], "add round"), MembershipInjection::Kind::add, 0});
            } else if (key == "remove") {
                auto w = words(value);
                if (w.size() != 2) p.fail("remove expects '<round> <index>'");
                sc.membership.push_back(
                    {p.number(w[0], "remove round"), MembershipInjection::Kind::remove, p.number(w[1], "remove index")});
            } else {
                p.fail("unknown key '" + key + "'");
            }
        } catch (const ScenarioError&) {
            throw;
        } catch (const std::invalid_argument& ex) {
            p.fail(ex.what());
        }
    }
    for (const char* required : {"n", "seed"})
        if (!seen.count(required))
            throw ScenarioError(file_name, line_no, std::string("missing required key '") + required + "'");
    return sf;
}

ScenarioFile load_scenario(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ScenarioError(path, 0, "cannot open scenario file");
    std::stringstream buf;
    buf << f.rdbuf();
    return parse_scenario(buf.str(), path);
}

std::string summary_line(const RunReport& report, std::size_t violations) {
    std::size_t blocks = 0;
    for (std::size_t i = 0; i < report.nodes.size(); ++i)
        if (report.honest(i)) blocks = std::max(blocks, report.nodes[i].blocks.size());
    std::ostringstream out;
    out << "scenario " << report.scenario << " seed " << report.seed << ": "
        << (report.terminated ? "terminated" : "not-terminated") << " blocks=" << blocks
        << " steps=" << report.steps << " violations=" << violations;
    return out.str();
}

int cmd_run(const std::string& scenario_path, const Overrides& overrides, std::ostream& out, std::ostream& err) {
    auto sf = load_with_overrides(scenario_path, overrides, err);
    if (!sf) return exit_usage;
    RunReport report = run(sf->scenario);
    auto violations = check_invariants(report);
    try {
        if (!sf->report_path.empty()) write_file(resolve(sf->report_path, overrides), report.serialize());
        if (!sf->trace_path.empty()) write_file(resolve(sf->trace_path, overrides), traces(report));
        if (!sf->dot_path.empty())
            write_file(resolve(sf->dot_path, overrides), dot_from_report(report.serialize(), sf->dot_node));
    } catch (const std::exception& ex) {
        err << ex.what() << "\n";
        return exit_usage;
    }
    out << summary_line(report, violations.size()) << "\n";
    for (const auto& v : violations) out << "  violation: " << v << "\n";
    if (!violations.empty()) return exit_violation;
    if (!report.terminated && !sf->scenario.expect_failure_allowed) return exit_violation;
    return exit_pass;
}

int cmd_sweep(const std::string& scenario_path, std::uint64_t first_seed, std::uint64_t last_seed,
              const Overrides& overrides, std::ostream& out, std::ostream& err) {
    if (last_seed < first_seed) {
        err << "empty seed range\n";
        return exit_usage;
    }
    auto base = load_with_overrides(scenario_path, overrides, err);
    if (!base) return exit_usage;
    std::vector<std::uint64_t> steps;
    std::size_t passes = 0, runs = 0;
    out << "seed terminated steps blocks violations\n";
    for (std::uint64_t seed = first_seed;; ++seed) {
        SimScenario sc = base->scenario;
        sc.seed = seed;
        RunReport report = run(sc);
        auto violations = check_invariants(report);
        std::size_t blocks = 0;
        for (std::size_t i = 0; i < report.nodes.size(); ++i)
            if (report.honest(i)) blocks = std::max(blocks, report.nodes[i].blocks.size());
        out << seed << " " << (report.terminated ? 1 : 0) << " " << report.steps << " " << blocks << " "
            << violations.size() << "\n";
        for (const auto& v : violations) out << "  violation: " << v << "\n";
        ++runs;
        if (violations.empty() && (report.terminated || sc.expect_failure_allowed)) ++passes;
        if (report.terminated) steps.push_back(report.steps);
        if (seed == last_seed) break;
    }
    std::sort(steps.begin(), steps.end());
    out << "passes " << passes << "/" << runs;
    if (!steps.empty()) out << " median_steps " << steps[steps.size() / 2] << " max_steps " << steps.back();
    out << "\n";
    return passes == runs ? exit_pass : exit_violation;
}

int cmd_export_dot(const std::string& report_path, const std::string& node, const std::string& out_path,
                   std::ostream& out, std::ostream& err) {
    std::ifstream f(report_path, std::ios::binary);
    if (!f) {
        err << report_path << ": cannot open report\n";
        return exit_usage;
    }
    std::stringstream buf;
    buf << f.rdbuf();
    try {
        std::string dot = dot_from_report(buf.str(), node);
        if (out_path.empty())
            out << dot;
        else
            write_file(out_path, dot);
    } catch (const std::exception& ex) {
        err << ex.what() << "\n";
        return exit_usage;
    }
    return exit_pass;
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
    auto num = [&](std::string_view s) {
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
            throw std::invalid_argument("bad seed range '" + text + "', expected A..B");
        return v;
    };
    auto dots = text.find("..");
    if (dots == std::string::npos) {
        auto v = num(text);
        return {v, v};
    }
    auto a = num(std::string_view(text).substr(0, dots));
    auto b = num(std::string_view(text).substr(dots + 2));
    if (b < a) throw std::invalid_argument("bad seed range '" + text + "': end before start");
    return {a, b};
}

}  // namespace parsec::cli
