#pragma once

// Replicated experiment runner and result-file comparison.
//
// Replication r samples its instance from derive_seed(master, r, kInstance) and seeds the
// environment noise from derive_seed(master, r, kNoise), independently of the algorithm, so
// every algorithm run with the same master seed faces the same instances and noise streams.
//
// Results file (one per algorithm and configuration):
//   # key=value            metadata, in fixed order
//   replication,seed,round,cumulative_regret,batches
//   ...                    ceil(T / stride) rows per replication, last round always included
//   # complete             written only after the last replication
// Rows are flushed replication by replication in index order, so an interrupted run leaves a
// readable prefix without the final marker. Wall time goes to <out>.timing, keeping the results
// and <out>.summary.csv byte-identical across runs and worker counts.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "blae/baselines.hpp"
#include "blae/core_types.hpp"
#include "blae/envsim.hpp"

namespace blae {

struct ExperimentConfig {
    std::string algorithm = "blae";
    std::size_t K = 50;
    std::size_t d = 5;
    std::int64_t T = 100000;
    Distribution distribution = Distribution::Uniform;
    std::size_t replications = 10;
    std::uint64_t master_seed = 0;
    AlgorithmOptions options;  // forwarded to the algorithm
    std::int64_t stride = 100;
    std::string output_path;  // empty: no files written
    std::size_t workers = 1;
    std::optional<BanditInstance> fixed_instance;  // replaces sampling; K and d follow the instance
    std::string instance_label;                    // recorded in the metadata when fixed_instance is set

    void validate() const {
        if (replications < 1) throw std::invalid_argument("replications must be >= 1");
        if (stride < 1) throw std::invalid_argument("stride must be >= 1");
        if (T < 4) throw std::invalid_argument("T must be >= 4");
        if (!fixed_instance) {
            if (K < 1) throw std::invalid_argument("K must be >= 1");
            if (d < 2) throw std::invalid_argument("d must be >= 2");
        }
        if (workers < 1) throw std::invalid_argument("workers must be >= 1");
        if (!AlgorithmRegistry::global().find(algorithm)) throw std::invalid_argument("unknown algorithm '" + algorithm + "'");
    }
};

/// Checkpoint rounds stride, 2 stride, ... and T; ceil(T / stride) entries.
inline std::vector<std::int64_t> checkpoint_rounds(std::int64_t T, std::int64_t stride) {
    if (stride < 1) throw std::invalid_argument("checkpoint_rounds: stride must be >= 1");
    std::vector<std::int64_t> out;
    for (std::int64_t t = stride; t < T; t += stride) out.push_back(t);
    out.push_back(T);
    return out;
}

struct Checkpoint {
    std::int64_t round = 0;
    double cumulative_regret = 0.0;
    std::size_t batches = 0;
};

struct ReplicationResult {
    std::size_t replication = 0;
    std::uint64_t instance_seed = 0;
    std::uint64_t noise_seed = 0;
    std::vector<Checkpoint> checkpoints;
    double final_regret = 0.0;
    std::size_t batches = 0;
    bool optimal_arm_eliminated = false;
    double wall_time = 0.0;
};

inline BanditInstance replication_instance(const ExperimentConfig& cfg, std::size_t rep) {
    if (cfg.fixed_instance) return *cfg.fixed_instance;
    return sample_instance({cfg.K, cfg.d, cfg.distribution, derive_seed(cfg.master_seed, rep, seed_stream::kInstance)});
}

inline ReplicationResult run_replication(const ExperimentConfig& cfg, std::size_t rep) {
    ReplicationResult r;
    r.replication = rep;
    r.instance_seed = derive_seed(cfg.master_seed, rep, seed_stream::kInstance);
    r.noise_seed = derive_seed(cfg.master_seed, rep, seed_stream::kNoise);
    const RunTrace trace = run_algorithm(cfg.algorithm, replication_instance(cfg, rep), cfg.T, cfg.options, r.noise_seed);
    for (std::int64_t t : checkpoint_rounds(cfg.T, cfg.stride)) {
        r.checkpoints.push_back({t, trace.cumulative_regret[static_cast<std::size_t>(t - 1)], trace.batches_started_by(t)});
    }
    r.final_regret = trace.final_regret();
    r.batches = trace.batch_count();
    r.optimal_arm_eliminated = trace.optimal_arm_ever_eliminated();
    r.wall_time = trace.wall_time;
    return r;
}

/// Ordered metadata written at the top of every results file.
inline std::vector<std::pair<std::string, std::string>> experiment_metadata(const ExperimentConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> m;
    m.emplace_back("algo", cfg.algorithm);
    if (cfg.fixed_instance) {
        m.emplace_back("K", std::to_string(cfg.fixed_instance->arms.K()));
        m.emplace_back("d", std::to_string(cfg.fixed_instance->arms.d()));
    } else {
        m.emplace_back("K", std::to_string(cfg.K));
        m.emplace_back("d", std::to_string(cfg.d));
    }
    m.emplace_back("T", std::to_string(cfg.T));
    m.emplace_back("dist", cfg.fixed_instance ? "file:" + cfg.instance_label : to_string(cfg.distribution));
    m.emplace_back("reps", std::to_string(cfg.replications));
    m.emplace_back("seed", std::to_string(cfg.master_seed));
    m.emplace_back("stride", std::to_string(cfg.stride));
    for (const auto& [k, v] : cfg.options) m.emplace_back("option." + k, v);
    return m;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

inline void write_records(std::ostream& out, const ReplicationResult& r) {
    for (const Checkpoint& c : r.checkpoints) {
        out << r.replication << ',' << r.instance_seed << ',' << c.round << ',' << format_double(c.cumulative_regret)
            << ',' << c.batches << '\n';
    }
}

}  // namespace detail

inline constexpr const char* kResultsHeader = "replication,seed,round,cumulative_regret,batches";
inline constexpr const char* kCompleteMarker = "# complete";

/// Runs all replications over a pool of cfg.workers threads. `on_result` is invoked on the calling
/// thread in replication order as soon as each prefix is available.
template <typename OnResult>
std::vector<ReplicationResult> run_replications(const ExperimentConfig& cfg, OnResult&& on_result) {
    cfg.validate();
    const std::size_t n = cfg.replications;
    std::vector<std::optional<ReplicationResult>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::mutex mu;
    std::condition_variable ready;
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::size_t finished_workers = 0;

    auto worker = [&]() {
        for (std::size_t rep; !abort && (rep = next.fetch_add(1)) < n;) {
            std::optional<ReplicationResult> res;
            std::exception_ptr err;
            try {
                res = run_replication(cfg, rep);
            } catch (...) {
                err = std::current_exception();
            }
            {
                std::lock_guard<std::mutex> lock(mu);
                slots[rep] = std::move(res);
                errors[rep] = err;
                if (err) abort = true;
            }
            ready.notify_all();
        }
        {
            std::lock_guard<std::mutex> lock(mu);
            ++finished_workers;
        }
        ready.notify_all();
    };
    const std::size_t pool_size = std::min(cfg.workers, n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < pool_size; ++w) pool.emplace_back(worker);

    std::vector<ReplicationResult> results;
    std::exception_ptr failure;
    for (std::size_t rep = 0; rep < n && !failure; ++rep) {
        std::unique_lock<std::mutex> lock(mu);
        ready.wait(lock, [&] { return slots[rep].has_value() || errors[rep] || finished_workers == pool_size; });
        if (errors[rep] || !slots[rep]) {
            failure = errors[rep];
            for (std::size_t j = 0; !failure && j < n; ++j) failure = errors[j];
            break;
        }
        ReplicationResult r = std::move(*slots[rep]);
        slots[rep].reset();
        lock.unlock();
        try {
            on_result(r);
        } catch (...) {
            failure = std::current_exception();
            break;
        }
        results.push_back(std::move(r));
    }
    abort = abort || static_cast<bool>(failure);
    for (auto& t : pool) t.join();
    if (!failure) {
        for (const auto& e : errors) {
            if (e) failure = e;
        }
    }
    if (failure) std::rethrow_exception(failure);
    return results;
}

inline std::vector<ReplicationResult> run_replications(const ExperimentConfig& cfg) {
    return run_replications(cfg, [](const ReplicationResult&) {});
}

struct CheckpointSummary {
    std::int64_t round = 0;
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation; 0 for a single replication
    double mean_batches = 0.0;
};

struct ExperimentSummary {
    std::vector<CheckpointSummary> checkpoints;
    double mean_final_regret = 0.0;
    double sd_final_regret = 0.0;
    double mean_batch_count = 0.0;
    std::size_t optimal_arm_eliminations = 0;
    double total_wall_time = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_sd(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
    return {mean, sd};
}

}  // namespace detail

inline ExperimentSummary summarize_results(const std::vector<ReplicationResult>& results) {
    if (results.empty()) throw std::invalid_argument("summarize_results: no replications");
    ExperimentSummary s;
    const std::size_t n_cp = results.front().checkpoints.size();
    for (std::size_t k = 0; k < n_cp; ++k) {
        std::vector<double> regret;
        double batches = 0.0;
        for (const auto& r : results) {
            regret.push_back(r.checkpoints[k].cumulative_regret);
            batches += static_cast<double>(r.checkpoints[k].batches);
        }
        const auto [m, sd] = detail::mean_sd(regret);
        s.checkpoints.push_back({results.front().checkpoints[k].round, m, sd, batches / static_cast<double>(results.size())});
    }
    std::vector<double> finals;
    double batches = 0.0;
    for (const auto& r : results) {
        finals.push_back(r.final_regret);
        batches += static_cast<double>(r.batches);
        s.optimal_arm_eliminations += r.optimal_arm_eliminated ? 1 : 0;
        s.total_wall_time += r.wall_time;
    }
    std::tie(s.mean_final_regret, s.sd_final_regret) = detail::mean_sd(finals);
    s.mean_batch_count = batches / static_cast<double>(results.size());
    return s;
}

inline void write_metadata(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& meta) {
    for (const auto& [k, v] : meta) out << "# " << k << '=' << v << '\n';
}

inline void write_summary(std::ostream& out, const ExperimentConfig& cfg, const ExperimentSummary& s) {
    write_metadata(out, experiment_metadata(cfg));
    out << "# mean_final_regret=" << detail::format_double(s.mean_final_regret) << '\n';
    out << "# sd_final_regret=" << detail::format_double(s.sd_final_regret) << '\n';
    out << "# mean_batch_count=" << detail::format_double(s.mean_batch_count) << '\n';
    out << "# optimal_arm_eliminations=" << s.optimal_arm_eliminations << '\n';
    out << "round,mean_cumulative_regret,sd_cumulative_regret,mean_batches\n";
    for (const auto& c : s.checkpoints) {
        out << c.round << ',' << detail::format_double(c.mean) << ',' << detail::format_double(c.sd) << ','
            << detail::format_double(c.mean_batches) << '\n';
    }
}

struct ExperimentRun {
    std::vector<ReplicationResult> results;
    ExperimentSummary summary;
    double wall_time = 0.0;  // elapsed, including pool overhead
};

/// Runs the experiment and, when cfg.output_path is set, writes the results file, the summary
/// and the timing file.
inline ExperimentRun run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    std::ofstream out;
    if (!cfg.output_path.empty()) {
        out.open(cfg.output_path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + cfg.output_path + " for writing");
        write_metadata(out, experiment_metadata(cfg));
        out << kResultsHeader << '\n';
        out.flush();
    }
    ExperimentRun run;
    run.results = run_replications(cfg, [&](const ReplicationResult& r) {
        if (!out.is_open()) return;
        detail::write_records(out, r);
        out.flush();
    });
    run.summary = summarize_results(run.results);
    run.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (out.is_open()) {
        out << kCompleteMarker << '\n';
        out.close();
        if (!out) throw std::runtime_error("error writing " + cfg.output_path);

        std::ofstream sum(cfg.output_path + ".summary.csv", std::ios::binary | std::ios::trunc);
        write_summary(sum, cfg, run.summary);
        if (!sum) throw std::runtime_error("error writing " + cfg.output_path + ".summary.csv");

        std::ofstream timing(cfg.output_path + ".timing", std::ios::binary | std::ios::trunc);
        timing << "total_wall_seconds=" << run.wall_time << '\n';
        timing << "algorithm_wall_seconds=" << run.summary.total_wall_time << '\n';
        for (const auto& r : run.results) timing << "replication." << r.replication << '=' << r.wall_time << '\n';
    }
    return run;
}

// ---------------------------------------------------------------------------
// Reading and comparing results files
// ---------------------------------------------------------------------------

struct ResultsFile {
    std::string path;
    std::map<std::string, std::string> metadata;
    std::vector<std::pair<std::string, std::string>> metadata_order;
    // replication -> checkpoints in file order
    std::map<std::size_t, std::vector<Checkpoint>> replications;
    std::map<std::size_t, std::uint64_t> seeds;
    bool complete = false;

    std::string get(const std::string& key) const {
        const auto it = metadata.find(key);
        return it == metadata.end() ? std::string() : it->second;
    }
};

inline ResultsFile parse_results(std::istream& in, const std::string& path = "<stream>") {
    ResultsFile f;
    f.path = path;
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line == kCompleteMarker) {
            f.complete = true;
            continue;
        }
        if (line[0] == '#') {
            const std::string body = line.substr(line.find_first_not_of("# "));
            const auto eq = body.find('=');
            if (eq != std::string::npos) {
                f.metadata[body.substr(0, eq)] = body.substr(eq + 1);
                f.metadata_order.emplace_back(body.substr(0, eq), body.substr(eq + 1));
            }
            continue;
        }
        if (!header_seen) {
            if (line != kResultsHeader) throw std::runtime_error(path + ": unexpected header '" + line + "'");
            header_seen = true;
            continue;
        }
        if (f.complete) throw std::runtime_error(path + ": data after completeness marker");
        std::istringstream ls(line);
        std::string fields[5];
        for (auto& field : fields) {
            if (!std::getline(ls, field, ',')) throw std::runtime_error(path + ": short row on line " + std::to_string(line_no));
        }
        try {
            const auto rep = static_cast<std::size_t>(std::stoull(fields[0]));
            f.seeds[rep] = std::stoull(fields[1]);
            f.replications[rep].push_back(
                {std::stoll(fields[2]), std::stod(fields[3]), static_cast<std::size_t>(std::stoull(fields[4]))});
        } catch (const std::exception&) {
            throw std::runtime_error(path + ": malformed row on line " + std::to_string(line_no));
        }
    }
    if (!header_seen) throw std::runtime_error(path + ": missing header");
    return f;
}

inline ResultsFile read_results(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return parse_results(in, path);
}

/// Raised when result files do not describe the same instances and seeds.
class ConfigMismatchError : public std::runtime_error {
public:
    explicit ConfigMismatchError(const std::string& diff) : std::runtime_error("result files are not comparable:\n" + diff) {}
};

inline const std::vector<std::string>& comparison_keys() {
    static const std::vector<std::string> keys = {"K", "d", "T", "dist", "reps", "seed", "stride"};
    return keys;
}

/// Throws ConfigMismatchError listing every differing key, incomplete file, or seed disagreement.
inline void check_comparable(const std::vector<ResultsFile>& files) {
    if (files.empty()) throw std::invalid_argument("summarize: no input files");
    std::ostringstream diff;
    const ResultsFile& ref = files.front();
    for (const auto& f : files) {
        if (!f.complete) diff << "  " << f.path << ": missing completeness marker\n";
    }
    for (std::size_t i = 1; i < files.size(); ++i) {
        for (const auto& key : comparison_keys()) {
            if (files[i].get(key) != ref.get(key)) {
                diff << "  " << key << ": " << ref.path << " has '" << ref.get(key) << "', " << files[i].path << " has '"
                     << files[i].get(key) << "'\n";
            }
        }
        if (files[i].seeds != ref.seeds) diff << "  replication seeds differ between " << ref.path << " and " << files[i].path << '\n';
    }
    const std::string text = diff.str();
    if (!text.empty()) throw ConfigMismatchError(text);
}

struct AlgorithmColumn {
    std::string name;
    std::vector<std::int64_t> rounds;
    std::vector<double> mean;
    std::vector<double> sd;
    std::vector<double> finals;  // per replication, in replication order
    double mean_final = 0.0;
    double sd_final = 0.0;
};

struct Comparison {
    std::vector<AlgorithmColumn> columns;
    std::vector<std::size_t> ranking;  // indices into columns, best (lowest mean final regret) first
};

inline Comparison compare(const std::vector<ResultsFile>& files) {
    check_comparable(files);
    Comparison cmp;
    for (const auto& f : files) {
        AlgorithmColumn col;
        col.name = f.get("algo").empty() ? f.path : f.get("algo");
        if (f.replications.empty()) throw std::runtime_error(f.path + ": no records");
        const std::size_t n_cp = f.replications.begin()->second.size();
        for (const auto& [rep, cps] : f.replications) {
            if (cps.size() != n_cp) throw std::runtime_error(f.path + ": replications have different checkpoint counts");
            col.finals.push_back(cps.back().cumulative_regret);
        }
        for (std::size_t k = 0; k < n_cp; ++k) {
            std::vector<double> xs;
            for (const auto& [rep, cps] : f.replications) xs.push_back(cps[k].cumulative_regret);
            const auto [m, sd] = detail::mean_sd(xs);
            col.rounds.push_back(f.replications.begin()->second[k].round);
            col.mean.push_back(m);
            col.sd.push_back(sd);
        }
        std::tie(col.mean_final, col.sd_final) = detail::mean_sd(col.finals);
        cmp.columns.push_back(std::move(col));
    }
    for (std::size_t i = 0; i < cmp.columns.size(); ++i) cmp.ranking.push_back(i);
    std::stable_sort(cmp.ranking.begin(), cmp.ranking.end(),
                     [&](std::size_t a, std::size_t b) { return cmp.columns[a].mean_final < cmp.columns[b].mean_final; });
    return cmp;
}

/// Per-checkpoint mean and sd per algorithm, paired final-regret differences against the first
/// file, and the ranking by mean final regret.
inline void write_comparison(std::ostream& out, const Comparison& cmp) {
    using detail::format_double;
    out << "round";
    for (const auto& c : cmp.columns) out << ',' << c.name << "_mean," << c.name << "_sd";
    out << '\n';
    for (std::size_t k = 0; k < cmp.columns.front().rounds.size(); ++k) {
        out << cmp.columns.front().rounds[k];
        for (const auto& c : cmp.columns) out << ',' << format_double(c.mean[k]) << ',' << format_double(c.sd[k]);
        out << '\n';
    }
    const AlgorithmColumn& ref = cmp.columns.front();
    out << "\npaired final regret (other - " << ref.name << ")\n";
    out << "algorithm,mean_difference,sd_difference,replications_where_" << ref.name << "_lower\n";
    for (std::size_t i = 1; i < cmp.columns.size(); ++i) {
        std::vector<double> diffs;
        std::size_t ref_lower = 0;
        for (std::size_t r = 0; r < ref.finals.size(); ++r) {
            diffs.push_back(cmp.columns[i].finals[r] - ref.finals[r]);
            ref_lower += ref.finals[r] < cmp.columns[i].finals[r] ? 1 : 0;
        }
        const auto [m, sd] = detail::mean_sd(diffs);
        out << cmp.columns[i].name << ',' << format_double(m) << ',' << format_double(sd) << ',' << ref_lower << '\n';
    }
    out << "\nranking by mean final regret\n";
    out << "rank,algorithm,mean_final_regret,sd_final_regret\n";
    for (std::size_t r = 0; r < cmp.ranking.size(); ++r) {
        const auto& c = cmp.columns[cmp.ranking[r]];
        out << r + 1 << ',' << c.name << ',' << format_double(c.mean_final) << ',' << format_double(c.sd_final) << '\n';
    }
}

}  // namespace blae
