#include "spingap/config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace spingap {

namespace {

using nlohmann::json;

std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (c == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& origin, std::size_t line_no, const std::string& what) {
    std::ostringstream msg;
    msg << origin << ":" << line_no << ": " << what;
    throw std::invalid_argument(msg.str());
}

}  // namespace

ParsedConfig parse_config(const std::string& text, const std::string& origin) {
    ParsedConfig cfg;
    bool saw_n_spins = false;
    bool saw_eta = false;
    std::string section;  // "" or "model" -> model keys; "experiment" -> plan keys

    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(origin, line_no, "malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "model" && section != "experiment")
                fail(origin, line_no, "unknown section [" + section + "]");
            if (section == "experiment" && !cfg.experiment) cfg.experiment.emplace();
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(origin, line_no, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value_text = trim(line.substr(eq + 1));
        json value;
        try {
            value = json::parse(value_text);
        } catch (const json::parse_error& e) {
            fail(origin, line_no, "value for '" + key + "' is not a JSON literal: " + e.what());
        }

        try {
            if (section.empty() || section == "model") {
                if (key == "n_spins") {
                    cfg.model.n_spins = value.get<int>();
                    saw_n_spins = true;
                } else if (key == "mixing") {
                    cfg.model.mixing.clear();
                    for (const auto& pair : value) {
                        if (!pair.is_array() || pair.size() != 2)
                            fail(origin, line_no, "mixing entries must be [p, beta_p] pairs");
                        cfg.model.mixing.push_back(
                            {pair[0].get<int>(), pair[1].get<double>()});
                    }
                } else if (key == "eta") {
                    cfg.model.external_field = value.get<std::vector<double>>();
                    saw_eta = true;
                } else if (key == "seed") {
                    cfg.model.seed = value.get<std::uint64_t>();
                } else {
                    fail(origin, line_no, "unknown model key '" + key + "'");
                }
            } else {
                ExperimentSettings& exp = *cfg.experiment;
                if (key == "beta_scale")
                    exp.beta_scale = value.get<std::vector<double>>();
                else if (key == "n_realizations")
                    exp.n_realizations = value.get<int>();
                else if (key == "epsilon")
                    exp.epsilon = value.get<double>();
                else if (key == "checks")
                    exp.checks = value.get<std::vector<std::string>>();
                else if (key == "out")
                    exp.out = value.get<std::string>();
                else if (key == "exact_omega")
                    exp.exact_omega = value.get<bool>();
                else if (key == "omega_samples")
                    exp.omega_samples = value.get<int>();
                else
                    fail(origin, line_no, "unknown experiment key '" + key + "'");
            }
        } catch (const json::type_error& e) {
            fail(origin, line_no, "bad type for '" + key + "': " + e.what());
        }
    }

    if (!saw_n_spins) throw std::invalid_argument(origin + ": missing required key n_spins");
    if (!saw_eta)
        cfg.model.external_field.assign(static_cast<std::size_t>(cfg.model.n_spins), 0.0);
    cfg.model.validate();
    return cfg;
}

ParsedConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.string());
}

void save_model_config(const std::filesystem::path& path, const ModelSpec& spec) {
    spec.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.precision(17);
    out << "n_spins = " << spec.n_spins << "\n";
    out << "mixing = [";
    for (std::size_t i = 0; i < spec.mixing.size(); ++i) {
        if (i) out << ", ";
        out << "[" << spec.mixing[i].p << ", " << spec.mixing[i].beta_p << "]";
    }
    out << "]\n";
    out << "eta = [";
    for (std::size_t i = 0; i < spec.external_field.size(); ++i) {
        if (i) out << ", ";
        out << spec.external_field[i];
    }
    out << "]\n";
    out << "seed = " << spec.seed << "\n";
}

}  // namespace spingap
