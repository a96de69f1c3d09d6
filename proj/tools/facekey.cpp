#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "facekey/errors.hpp"
#include "facekey/ingest.hpp"
#include "facekey/profile.hpp"
#include "facekey/service.hpp"
#include "facekey/simcal.hpp"
#include "facekey/sinks.hpp"

using namespace facekey;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

void print_diagnostics(const std::vector<Diagnostic>& diags, std::ostream& os) {
    for (const auto& d : diags)
        os << (d.severity == Severity::Error ? "error" : "warning") << " [" << d.code << "] " << d.message << '\n';
}

// "builtin:<name>" or a file path.
std::optional<Profile> load_profile(const std::string& ref) {
    if (ref.rfind("builtin:", 0) == 0) {
        const auto name = ref.substr(8);
        const auto& all = builtin_profiles();
        if (auto it = all.find(name); it != all.end()) return it->second;
        std::cerr << "unknown builtin profile '" << name << "'\n";
        return std::nullopt;
    }
    auto result = parse_profile_file(ref);
    print_diagnostics(result.diagnostics, std::cerr);
    return result.profile;
}

std::optional<simcal::EpisodeScript> load_script(const std::string& path) {
    try {
        return simcal::load_script(path);
    } catch (const std::exception& e) {
        std::cerr << path << ": " << e.what() << '\n';
        return std::nullopt;
    }
}

std::vector<AUFrame> read_frames(const std::string& path) {
    auto stream = open_stream({SourceKind::ReplayFile, path, std::nullopt, false});
    std::vector<AUFrame> frames;
    while (true) {
        auto next = stream->next_frame();
        if (auto* f = std::get_if<AUFrame>(&next)) frames.push_back(*f);
        else break;
    }
    for (const auto& e : stream->drain_errors()) std::cerr << "warning: " << e.message << '\n';
    return frames;
}

bool write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return true;
    }
    std::ofstream out(path);
    out << text;
    if (!out) {
        std::cerr << "cannot write " << path << '\n';
        return false;
    }
    return true;
}

struct RunArgs {
    std::string profile;
    std::string source = "replay";
    std::string input;
    std::optional<double> fps;
    std::string sink = "collect";
    std::string event_log;
    std::optional<std::string> listen;
    std::string transcripts;
    bool no_http = false;
};

int cmd_run(const RunArgs& a) {
    auto profile = load_profile(a.profile);
    if (!profile) return 2;

    StreamSource source;
    if (a.source == "replay") {
        if (a.input.empty()) {
            std::cerr << "--input is required for replay sources\n";
            return 2;
        }
        source = {SourceKind::ReplayFile, a.input, a.fps, true};
    } else if (a.source == "socket") {
        source = {SourceKind::LiveSocket, a.input.empty() ? "tcp:127.0.0.1:8766" : a.input, std::nullopt, false};
    } else {
        source = {SourceKind::StandardInput, "", std::nullopt, false};
    }

    std::shared_ptr<KeySink> sink;
    try {
        if (a.sink == "platform") sink = std::make_shared<PlatformSink>();
        else if (a.sink == "file") sink = std::make_shared<EventLogSink>(a.event_log.empty() ? "events.csv" : a.event_log);
        else sink = std::make_shared<CollectingSink>();
    } catch (const SinkError& e) {
        std::cerr << "sink: " << e.what() << '\n';
        return 3;
    }

    std::unique_ptr<FrameStream> stream;
    try {
        stream = open_stream(source);
    } catch (const SourceOpenError& e) {
        std::cerr << "source: " << e.what() << '\n';
        return 3;
    }

    HostOptions options;
    options.transcript_endpoint = a.transcripts;
    EngineHost host(std::move(*profile), std::move(stream), sink, options);
    ControlService service(host);
    if (!a.no_http) {
        try {
            const auto [h, p] = ControlService::resolve_listen(a.listen);
            const int bound = service.start(h, p);
            std::cerr << "control service on " << h << ':' << bound << '\n';
        } catch (const std::exception& e) {
            std::cerr << "listen: " << e.what() << '\n';
            return 3;
        }
    }

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    host.start();
    while (!host.finished() && !g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    host.stop();
    service.stop();

    const auto status = host.status();
    std::cerr << "frames " << status.frames_processed << '\n';
    for (const auto& r : status.rules) std::cerr << r.rule_id << " fires " << r.total_fires << '\n';
    if (auto* c = dynamic_cast<CollectingSink*>(sink.get()))
        for (const auto& e : c->events()) std::cout << format_event(e) << '\n';
    return 0;
}

int cmd_validate(const std::string& path) {
    if (path.rfind("builtin:", 0) == 0) {
        auto p = load_profile(path);
        if (!p) return 1;
        print_diagnostics(validate_profile(*p), std::cout);
        std::cout << "ok\n";
        return 0;
    }
    const auto result = parse_profile_file(path);
    print_diagnostics(result.diagnostics, std::cout);
    if (!result.ok()) {
        std::cout << "invalid\n";
        return 1;
    }
    std::cout << "ok\n";
    return 0;
}

int cmd_replay(const std::string& framelog, const std::string& profile_ref, const std::string& out_path) {
    auto profile = load_profile(profile_ref);
    if (!profile) return 2;
    std::unique_ptr<FrameStream> stream;
    std::shared_ptr<KeySink> sink;
    try {
        stream = open_stream({SourceKind::ReplayFile, framelog, std::nullopt, false});
        sink = std::make_shared<EventLogSink>(out_path);
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 3;
    }
    HostOptions options;
    options.realtime = false;
    EngineHost host(std::move(*profile), std::move(stream), sink, options);
    host.start();
    host.wait();
    host.stop();
    sink->flush();
    const auto status = host.status();
    for (const auto& err : status.last_errors) std::cerr << "warning: " << err << '\n';
    return 0;
}

int cmd_sim_generate(const std::string& script_path, const std::string& profile_ref, const std::string& out) {
    auto script = load_script(script_path);
    auto profile = load_profile(profile_ref);
    if (!script || !profile) return 2;
    try {
        const auto frames = simcal::generate_stream(*script, profile->rules);
        std::ostringstream os;
        os << tracker_header_line() << '\n';
        for (const auto& f : frames) os << serialize_tracker_record(f) << '\n';
        return write_text(out, os.str()) ? 0 : 3;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
}

int cmd_sim_run(const std::string& script_path, const std::string& profile_ref, const std::string& frames_path,
                const std::string& out) {
    auto script = load_script(script_path);
    auto profile = load_profile(profile_ref);
    if (!script || !profile) return 2;
    try {
        const auto frames =
            frames_path.empty() ? simcal::generate_stream(*script, profile->rules) : read_frames(frames_path);
        const auto triggers = simcal::run_profile(*profile, frames);
        const auto metrics = simcal::measure(triggers, *script);
        return write_text(out, simcal::metrics_csv(metrics, *script)) ? 0 : 3;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
}

std::vector<float> parse_grid(const std::string& text) {
    // "lo:hi:step" or a comma list.
    std::vector<float> out;
    if (std::count(text.begin(), text.end(), ':') == 2) {
        float lo = 0, hi = 0, step = 0;
        if (std::sscanf(text.c_str(), "%f:%f:%f", &lo, &hi, &step) != 3 || step <= 0)
            throw std::invalid_argument("bad grid '" + text + "'");
        const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-6));
        for (int i = 0; i <= n; ++i) out.push_back(quantize_2dp(lo + i * step));
        return out;
    }
    std::stringstream ss(text);
    for (std::string part; std::getline(ss, part, ',');)
        if (!part.empty()) out.push_back(std::stof(part));
    return out;
}

int cmd_sim_sweep(const std::string& script_path, const std::string& profile_ref, const std::string& rule_id,
                  const std::vector<int>& aus, const std::string& grid, const std::vector<int>& ks,
                  const std::string& frames_path, const std::string& out) {
    auto script = load_script(script_path);
    auto profile = load_profile(profile_ref);
    if (!script || !profile) return 2;
    const auto* rule = profile->find_rule(rule_id);
    if (!rule) {
        std::cerr << "unknown rule '" << rule_id << "'\n";
        return 2;
    }
    std::vector<AuId> au_ids;
    for (const int n : aus) {
        auto id = AuId::from_number(n);
        if (!id) {
            std::cerr << "unknown AU " << n << '\n';
            return 2;
        }
        au_ids.push_back(*id);
    }
    try {
        const auto thresholds = parse_grid(grid);
        const auto frames =
            frames_path.empty() ? simcal::generate_stream(*script, profile->rules) : read_frames(frames_path);
        const auto rows = simcal::sweep(frames, *script, *rule, au_ids, thresholds, ks);
        return write_text(out, simcal::sweep_csv(rows)) ? 0 : 3;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
}

int cmd_export(const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, profile] : builtin_profiles())
        if (!write_text((std::filesystem::path(dir) / (name + ".json")).string(), serialize_profile(profile))) return 3;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Facial action unit to keystroke engine"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "Run the engine on a frame source");
    run_cmd->add_option("--profile", run.profile, "Profile file or builtin:<name>")->required();
    run_cmd->add_option("--source", run.source)->check(CLI::IsMember({"replay", "socket", "stdin"}));
    run_cmd->add_option("--input", run.input, "Replay file or socket endpoint (tcp:HOST:PORT, unix:PATH)");
    run_cmd->add_option("--fps", run.fps, "Replay pacing override");
    run_cmd->add_option("--sink", run.sink)->check(CLI::IsMember({"collect", "file", "platform"}));
    run_cmd->add_option("--event-log", run.event_log, "Event log path for --sink file");
    run_cmd->add_option("--listen", run.listen, "Control service address HOST:PORT");
    run_cmd->add_option("--transcripts", run.transcripts, "Transcript socket endpoint");
    run_cmd->add_flag("--no-http", run.no_http, "Do not start the control service");

    std::string validate_path;
    auto* validate_cmd = app.add_subcommand("validate", "Validate a profile");
    validate_cmd->add_option("profile", validate_path)->required();

    std::string replay_in, replay_profile, replay_out;
    auto* replay_cmd = app.add_subcommand("replay", "Replay a frame log offline into an event log");
    replay_cmd->add_option("framelog", replay_in)->required();
    replay_cmd->add_option("--profile", replay_profile)->required();
    replay_cmd->add_option("--out", replay_out)->required();

    auto* sim = app.add_subcommand("sim", "Synthetic streams and calibration");
    sim->require_subcommand(1);
    std::string sim_script, sim_profile = "builtin:table1-default", sim_out, sim_frames, sweep_rule,
                                                                   sweep_grid = "0.5:4.5:0.25";
    std::vector<int> sweep_aus, sweep_ks{5};
    auto* gen = sim->add_subcommand("generate", "Write a synthetic frame log");
    auto* simrun = sim->add_subcommand("run", "Run a profile over a script and print metrics");
    auto* sweep = sim->add_subcommand("sweep", "Grid sweep of one rule's threshold and frame count");
    for (auto* c : {gen, simrun, sweep}) {
        c->add_option("script", sim_script)->required();
        c->add_option("--profile", sim_profile);
        c->add_option("--out", sim_out);
    }
    simrun->add_option("--frames", sim_frames, "Use a recorded frame log instead of generating");
    sweep->add_option("--frames", sim_frames);
    sweep->add_option("--rule", sweep_rule)->required();
    sweep->add_option("--au", sweep_aus, "AU numbers whose thresholds are swept")->required();
    sweep->add_option("--thresholds", sweep_grid, "lo:hi:step or comma list");
    sweep->add_option("--k", sweep_ks, "Frame thresholds");

    std::string export_dir;
    auto* export_cmd = app.add_subcommand("export-builtins", "Write the builtin profiles as files");
    export_cmd->add_option("dir", export_dir)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return cmd_run(run);
        if (*validate_cmd) return cmd_validate(validate_path);
        if (*replay_cmd) return cmd_replay(replay_in, replay_profile, replay_out);
        if (*gen) return cmd_sim_generate(sim_script, sim_profile, sim_out);
        if (*simrun) return cmd_sim_run(sim_script, sim_profile, sim_frames, sim_out);
        if (*sweep)
            return cmd_sim_sweep(sim_script, sim_profile, sweep_rule, sweep_aus, sweep_grid, sweep_ks, sim_frames,
                                 sim_out);
        if (*export_cmd) return cmd_export(export_dir);
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
    return 0;
}
