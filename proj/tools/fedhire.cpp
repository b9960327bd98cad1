#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedhire/experiment.hpp"

namespace {

using nlohmann::json;

fedhire::LabelColumn parse_label_selector(const std::string& s) {
    if (s.empty() || s == "none") return std::monostate{};
    long idx = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), idx);
    if (ec == std::errc() && ptr == s.data() + s.size()) return idx;
    return s;
}

// "2000,4000" -> {2000, 4000}; "" -> {}
std::vector<std::size_t> size_list(const std::string& s, const std::string& flag) {
    std::vector<std::size_t> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (item.empty()) continue;
        std::size_t v = 0;
        const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size() || v == 0)
            throw fedhire::InvalidArgument(flag + ": '" + item + "' is not a positive integer");
        out.push_back(v);
    }
    return out;
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw fedhire::InvalidArgument("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw fedhire::ParseError("'" + path + "' is not valid JSON: " + e.what(), 0, 0);
    }
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        if (!std::cout) throw std::runtime_error("failed writing to stdout");
        return;
    }
    std::ofstream out(path);
    out << text;
    out.close();
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

int report_error(const std::string& kind, const std::string& message, int code, std::size_t row = 0,
                 std::size_t column = 0) {
    json err{{"error", kind}, {"message", message}};
    if (row) err["row"] = row;
    if (column) err["column"] = column;
    std::cerr << err.dump() << '\n';
    return code;
}

std::string describe(const json& j) {
    std::ostringstream os;
    if (j.contains("centroids") && j.contains("client_id")) {
        const auto p = fedhire::payload_from_json(j);
        os << "payload: client " << p.client_id << ", " << p.centroids.rows() << " centroid(s) x "
           << p.centroids.cols() << " feature(s)\n";
    } else if (j.contains("levels") && j.contains("codes")) {
        os << "hierarchy: " << j.at("levels").size() << " level(s), k =";
        for (const auto& l : j.at("levels")) os << ' ' << l.at("k").get<std::size_t>();
        os << "\n  stacked centroids: " << j.at("codes").size() << "\n";
        if (j.contains("U")) os << "  global clusters: " << j.at("U").size() << "\n";
    } else if (j.contains("clients") && j.at("clients").is_array()) {
        const auto plan = fedhire::plan_from_json(j);
        os << "partition plan: " << plan.client_count() << " client(s), " << plan.provenance.size()
           << " fragment(s)\n";
        for (std::size_t l = 0; l < plan.client_count(); ++l)
            os << "  client " << l << ": " << plan.clients[l].size() << " object(s)\n";
    } else if (j.contains("summary") && j.contains("runs")) {
        os << "results: " << j.at("runs").size() << " run(s)\n";
        for (const auto& [name, s] : j.at("summary").items())
            os << "  " << name << ": " << s.at("formatted").get<std::string>() << "\n";
        if (j.contains("determinism_hash")) os << "  hash: " << j.at("determinism_hash").get<std::string>() << "\n";
    } else {
        throw fedhire::InvalidArgument("unrecognized JSON document");
    }
    return os.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated clustering in a single upload round"};
    app.require_subcommand(1);

    // partition
    auto* partition = app.add_subcommand("partition", "Split a labeled dataset over clients and print the plan");
    std::string p_data, p_labels = "-1", p_fragments = "auto", p_out;
    std::size_t p_clients = 8;
    std::uint64_t p_seed = 0;
    partition->add_option("--data", p_data, "CSV dataset")->required();
    partition->add_option("--labels", p_labels, "Label column: name, index (negative from the right)")
        ->capture_default_str();
    partition->add_option("--clients", p_clients, "Number of clients")->capture_default_str();
    partition->add_option("--fragments", p_fragments, "Fragments per ground-truth cluster, or auto")
        ->capture_default_str();
    partition->add_option("--seed", p_seed, "Master seed")->capture_default_str();
    partition->add_option("--out", p_out, "Output file (default stdout)");

    // run
    auto* run = app.add_subcommand("run", "Run the federation repeatedly and score it");
    std::string r_spec, r_data, r_labels = "-1", r_fragments = "auto", r_out, r_report, r_plan;
    std::size_t r_clients = 8, r_k_star = 2, r_repeats = 10;
    double r_eta = 0.05, r_k0_fraction = 0.5;
    std::uint64_t r_seed = 0;
    bool r_parallel = false;
    run->add_option("--spec", r_spec, "Experiment spec JSON; flags given explicitly override it");
    auto* o_data = run->add_option("--data", r_data, "CSV dataset");
    auto* o_labels = run->add_option("--labels", r_labels, "Label column: name or index")->capture_default_str();
    auto* o_clients = run->add_option("--clients", r_clients, "Number of clients")->capture_default_str();
    auto* o_k_star = run->add_option("--k-star", r_k_star, "Number of global clusters")->capture_default_str();
    auto* o_eta = run->add_option("--eta", r_eta, "Learning rate")->capture_default_str();
    auto* o_k0 = run->add_option("--k0-fraction", r_k0_fraction, "Initial clusterlets per object")->capture_default_str();
    auto* o_repeats = run->add_option("--repeats", r_repeats, "Number of runs")->capture_default_str();
    auto* o_seed = run->add_option("--seed", r_seed, "Seed of the first run")->capture_default_str();
    auto* o_fragments = run->add_option("--fragments", r_fragments, "Fragments per cluster, or auto")->capture_default_str();
    auto* o_out = run->add_option("--out", r_out, "Results file (default stdout)");
    auto* o_parallel = run->add_flag("--parallel-clients", r_parallel, "Run clients concurrently");
    run->add_option("--report", r_report, "Write the hierarchy and global clustering of the first run here");
    run->add_option("--plan", r_plan, "Use this partition plan instead of generating one (single run)");

    // bench
    auto* bench = app.add_subcommand("bench", "Time full runs on synthetic Gaussian mixtures");
    std::string b_sizes = "2000,4000", b_dims = "4,8";
    std::string b_out;
    fedhire::BenchSettings b_settings;
    auto* o_sizes = bench->add_option("--sizes", b_sizes, "Object counts, comma separated; empty for none [2000,4000]")->expected(0, 1);
    auto* o_dims = bench->add_option("--dims", b_dims, "Feature counts, comma separated; empty for none [4,8]")->expected(0, 1);
    bench->add_option("--k0", b_settings.k0_absolute, "Initial clusterlets per client")->capture_default_str();
    bench->add_option("--repeats", b_settings.repeats, "Best-of repetitions")->capture_default_str();
    bench->add_option("--out", b_out, "CSV file (default stdout)");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Summarize a payload, plan, report or results JSON file");
    std::string i_file;
    inspect->add_option("file", i_file, "JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report_error("usage", e.what(), 2);
    }

    try {
        if (*partition) {
            fedhire::CsvOptions options;
            options.label = parse_label_selector(p_labels);
            const auto table = fedhire::load_csv(p_data, options);
            fedhire::FederationConfig cfg;
            cfg.client_count = p_clients;
            cfg.seed = p_seed;
            cfg = fedhire::config_from_json(json{{"fragments", p_fragments == "auto" ? json("auto") : json(std::stoul(p_fragments))}}, cfg);
            const auto plan = fedhire::fragment_partition(table.data, cfg);
            write_output(p_out, fedhire::to_json(plan).dump() + "\n");
        } else if (*run) {
            fedhire::ExperimentSpec spec;
            if (!r_spec.empty()) spec = fedhire::spec_from_json(read_json_file(r_spec));
            if (o_data->count()) spec.dataset = r_data;
            if (o_labels->count() || r_spec.empty()) spec.label = parse_label_selector(r_labels);
            const bool fresh = r_spec.empty();
            if (o_clients->count() || fresh) spec.config.client_count = r_clients;
            if (o_k_star->count() || fresh) spec.config.k_star = r_k_star;
            if (o_eta->count() || fresh) spec.config.learning_rate = r_eta;
            if (o_k0->count() || fresh) spec.config.k0_fraction = r_k0_fraction;
            if (o_repeats->count() || fresh) spec.repeats = r_repeats;
            if (o_seed->count() || fresh) spec.config.seed = r_seed;
            if (o_fragments->count() || fresh)
                spec.config = fedhire::config_from_json(
                    json{{"fragments", r_fragments == "auto" ? json("auto") : json(std::stoul(r_fragments))}}, spec.config);
            if (o_out->count()) spec.output = r_out;
            if (o_parallel->count()) spec.config.parallel_clients = r_parallel;
            if (spec.dataset.empty()) throw fedhire::InvalidArgument("run: --data or a spec with \"data\" is required");
            spec.validate();

            if (!r_plan.empty() || !r_report.empty()) {
                fedhire::CsvOptions options;
                options.label = spec.label;
                const auto table = fedhire::load_csv(spec.dataset, options);
                std::optional<fedhire::PartitionPlan> plan;
                if (!r_plan.empty()) plan = fedhire::plan_from_json(read_json_file(r_plan));
                const auto r = fedhire::run_one_shot(table.data, spec.config, plan);
                std::vector<std::vector<fedhire::Label>> per_client;
                for (const auto& idx : r.plan.clients) {
                    per_client.emplace_back();
                    for (std::size_t i : idx) per_client.back().push_back(r.object_labels[i]);
                }
                if (!r_report.empty())
                    write_output(r_report, fedhire::report_json(r.hierarchy, r.representation, r.global, per_client).dump() + "\n");
                if (plan) {
                    json out{{"dataset", spec.dataset},
                             {"config", fedhire::config_json(spec.config)},
                             {"object_labels", r.object_labels},
                             {"hierarchy_k", r.hierarchy.ks()},
                             {"uploads", r.upload_count},
                             {"communicated_values", r.communicated_values},
                             {"timings", fedhire::timings_json(r.timings)}};
                    if (table.data.has_labels()) {
                        const auto s = fedhire::metrics::evaluate(r.object_labels, table.data.labels());
                        out["scores"] = {{"purity", s.purity}, {"ari", s.ari}, {"nmi", s.nmi}, {"acc", s.acc}};
                    }
                    out["determinism_hash"] = fedhire::determinism_hash(out);
                    write_output(spec.output, out.dump(2) + "\n");
                    return 0;
                }
            }
            write_output(spec.output, fedhire::cmd_run(spec).dump(2) + "\n");
        } else if (*bench) {
            // a bare --sizes= means an empty list, not the default
            for (auto [opt, target] : {std::pair{o_sizes, &b_sizes}, std::pair{o_dims, &b_dims}})
                if (opt->count() && (opt->results().empty() || opt->results().front().empty())) target->clear();
            write_output(b_out, fedhire::bench_csv(fedhire::cmd_bench(size_list(b_sizes, "--sizes"), size_list(b_dims, "--dims"), b_settings)));
        } else if (*inspect) {
            write_output("", describe(read_json_file(i_file)));
        }
    } catch (const fedhire::ParseError& e) {
        return report_error("parse", e.what(), 1, e.row(), e.column());
    } catch (const fedhire::InvalidArgument& e) {
        return report_error("invalid_argument", e.what(), 1);
    } catch (const fedhire::ExperimentError& e) {
        return report_error("experiment", e.what(), 1);
    } catch (const json::exception& e) {
        return report_error("invalid_json", e.what(), 1);
    } catch (const std::exception& e) {
        return report_error("failure", e.what(), 1);
    }
    return 0;
}
