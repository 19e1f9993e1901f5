#include "cli.hpp"

#include <cstdio>

#include "iibr/io.hpp"

namespace cli {

namespace {
std::string current_stage = "setup";
}

void set_stage(const std::string& s) { current_stage = s; }
const std::string& stage() { return current_stage; }

void add_common(CLI::App* sub, Common& c)
{
    sub->add_option("--config", c.config, "JSON file with option defaults (flags win)");
    sub->add_option("--seed", c.seed, "random seed")->capture_default_str();
    sub->add_option("--threads", c.threads, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

namespace {

std::string key_of(const CLI::Option* o)
{
    std::string n = o->get_single_name();
    for (char& ch : n)
        if (ch == '-')
            ch = '_';
    return n;
}

bool skip(const CLI::Option* o)
{
    const std::string n = o->get_single_name();
    return n == "help" || n == "config";
}

} // namespace

void merge_config(CLI::App* sub, const Common& c)
{
    if (c.config.empty())
        return;
    json j;
    try {
        j = iibr::io::read_json(c.config);
    } catch (const iibr::Error& e) {
        throw UsageError(std::string("--config: ") + e.what());
    }
    if (!j.is_object())
        throw UsageError("--config: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        CLI::Option* target = nullptr;
        for (CLI::Option* o : sub->get_options())
            if (!skip(o) && key_of(o) == it.key())
                target = o;
        if (!target)
            throw UsageError("--config: unknown key \"" + it.key() + "\"");
        if (target->count() > 0)
            continue; // the command line wins
        std::vector<std::string> values;
        auto as_string = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
        if (it.value().is_array())
            for (const json& v : it.value())
                values.push_back(as_string(v));
        else
            values.push_back(as_string(it.value()));
        try {
            for (const std::string& v : values)
                target->add_result(v);
            target->run_callback();
        } catch (const CLI::Error& e) {
            throw UsageError("--config: " + it.key() + ": " + e.what());
        }
    }
}

json resolved_config(CLI::App* sub)
{
    json out = json::object();
    for (CLI::Option* o : sub->get_options()) {
        if (skip(o))
            continue;
        std::vector<std::string> r = o->results();
        if (o->get_expected_max() == 0) // flag
            out[key_of(o)] = o->count() > 0;
        else if (!r.empty())
            out[key_of(o)] = r.size() == 1 ? json(r[0]) : json(r);
        else if (!o->get_default_str().empty())
            out[key_of(o)] = o->get_default_str();
        else
            out[key_of(o)] = nullptr;
    }
    return out;
}

json announce(CLI::App* sub, const Common& c)
{
    json j = {{"command", sub->get_name()}, {"version", version}, {"seed", c.seed}, {"config", resolved_config(sub)}};
    std::printf("%s\n", j.dump(2).c_str());
    std::fflush(stdout);
    return j;
}

std::pair<int, int> parse_pair(const std::string& s, const char* what)
{
    auto x = s.find('x');
    try {
        if (x == std::string::npos)
            throw std::invalid_argument("");
        size_t a_used, b_used;
        std::string as = s.substr(0, x), bs = s.substr(x + 1);
        int a = std::stoi(as, &a_used), b = std::stoi(bs, &b_used);
        if (a_used != as.size() || b_used != bs.size())
            throw std::invalid_argument("");
        return {a, b};
    } catch (const std::exception&) {
        throw UsageError(std::string(what) + ": expected AxB, got \"" + s + "\"");
    }
}

iibr::GridGeometry parse_grid(const std::string& grid, int height, int width)
{
    auto [v, u] = parse_pair(grid, "--grid");
    if (v < 1 || u < 1)
        throw UsageError("--grid: both counts must be at least 1");
    if (height < 1 || width < 1)
        throw UsageError("image size must be positive");
    return iibr::GridGeometry(v, u, height, width);
}

} // namespace cli
