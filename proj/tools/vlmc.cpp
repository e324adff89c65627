#include <CLI11.hpp>

#include <cstring>
#include <exception>
#include <iostream>
#include <string>
#include <string_view>

#include "vlmc/vlmc.hpp"

namespace {

// --config has to be applied before the flags, which override it.
std::string find_config_path(int argc, char** argv) {
    std::string path;
    for (int i = 1; i < argc; ++i) {
        const std::string_view a = argv[i];
        if (a == "--config" && i + 1 < argc) path = argv[++i];
        else if (a.starts_with("--config=")) path = std::string(a.substr(9));
    }
    return path;
}

void bind(CLI::App& app, vlmc::RunConfig& cfg, const std::string& flag, const std::string& key,
          const std::string& help) {
    app.add_option_function<std::string>(
           flag, [&cfg, key](const std::string& v) { vlmc::set_config_value(cfg, key, v); }, help)
        ->type_name("VALUE");
}

}  // namespace

int main(int argc, char** argv) {
    vlmc::RunConfig cfg;
    CLI::App app{"Variable-length Markov chain models of web navigation sessions"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "key = value run configuration; flags override it");
    bind(app, cfg, "-i,--input", "input", "input file(s), comma separated ('-' for stdin)");
    bind(app, cfg, "--input-kind", "input_kind", "raw | sessions");
    bind(app, cfg, "--format", "format", "log format, e.g. csv:source,timestamp,url,status");
    bind(app, cfg, "--gap", "gap", "session gap in seconds");
    bind(app, cfg, "--max-len", "max_len", "maximum session length");
    bind(app, cfg, "--exclude-suffixes", "exclude_suffixes", "url suffixes to drop");
    bind(app, cfg, "--keep-suffixes", "keep_suffixes", "exceptions to --exclude-suffixes");
    bind(app, cfg, "--exclude-status", "exclude_status", "status classes to drop, e.g. 4,5");
    bind(app, cfg, "--order", "order", "model order(s)");
    bind(app, cfg, "--gamma", "gamma", "accuracy threshold(s)");
    bind(app, cfg, "--gamma-mode", "gamma_mode", "max | avg");
    bind(app, cfg, "--num-visits", "num_visits", "minimum page views for cloning");
    bind(app, cfg, "--lambda", "lambda", "trail cut-point");
    bind(app, cfg, "--mtl", "mtl", "maximum trail length(s)");
    bind(app, cfg, "--length-mode", "length_mode", "strict | nonstrict (comma list allowed)");
    bind(app, cfg, "--top-m", "top_m", "ranked list size");
    bind(app, cfg, "--folds", "folds", "number of temporal partitions");
    bind(app, cfg, "--shuffle", "shuffle", "true for seeded shuffled folds");
    bind(app, cfg, "--seed", "seed", "seed for shuffled folds");
    bind(app, cfg, "--out-dir", "out_dir", "output directory");
    bind(app, cfg, "--model", "model", "model file (trails)");
    bind(app, cfg, "--pages", "pages", "page table for id session files");

    struct Command {
        const char* name;
        const char* help;
        vlmc::Outputs (*run)(const vlmc::RunConfig&);
    };
    const Command commands[] = {
        {"sessionize", "parse, filter and sessionize inputs", vlmc::cmd_sessionize},
        {"build", "build the model and count states per order", vlmc::cmd_build},
        {"trails", "extract top-m trails", vlmc::cmd_trails},
        {"summarize", "compare trail rankings with n-gram rankings", vlmc::cmd_summarize},
        {"predict", "temporal k-fold next-page prediction", vlmc::cmd_predict},
        {"report", "dataset characteristics and n-gram counts", vlmc::cmd_report},
    };
    for (const auto& c : commands) app.add_subcommand(c.name, c.help)->fallthrough();

    try {
        if (auto path = find_config_path(argc, argv); !path.empty()) cfg = vlmc::load_config(path);
        app.parse(argc, argv);
        const auto* sub = app.get_subcommands().front();
        for (const auto& c : commands) {
            if (sub->get_name() != c.name) continue;
            auto outputs = c.run(cfg);
            outputs["run.conf"] = vlmc::format_config(cfg);
            vlmc::write_outputs(cfg.out_dir, outputs);
            if (auto it = outputs.find("summary.csv"); it != outputs.end()) std::cout << it->second;
            if (auto it = outputs.find("report.csv"); it != outputs.end()) std::cout << it->second;
        }
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "vlmc: " << e.what() << '\n';
        return 2;
    } catch (const vlmc::ConfigError& e) {
        std::cerr << "vlmc: configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "vlmc: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
