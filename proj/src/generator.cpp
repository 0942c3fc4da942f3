#include "cmtr/generator.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <map>
#include <unordered_map>

#include "cmtr/error.hpp"
#include "cmtr/rng.hpp"
#include "json.hpp"

using nlohmann::json;

namespace cmtr::summarize {

std::vector<std::pair<TokenId, double>> filter_top_k_top_p(std::vector<std::pair<TokenId, double>> probs,
                                                           std::size_t top_k, double top_p) {
    if (probs.empty()) return probs;
    std::stable_sort(probs.begin(), probs.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    if (top_k > 0 && probs.size() > top_k) probs.resize(top_k);

    double total = 0.0;
    for (const auto& p : probs) total += p.second;
    double cumulative = 0.0;
    std::size_t keep = probs.size();
    for (std::size_t i = 0; i < probs.size(); ++i) {
        cumulative += probs[i].second / total;
        if (cumulative >= top_p) {
            keep = i + 1;
            break;
        }
    }
    probs.resize(std::max<std::size_t>(1, keep));

    double kept = 0.0;
    for (const auto& p : probs) kept += p.second;
    for (auto& p : probs) p.second /= kept;
    return probs;
}

std::size_t sample_index(const std::vector<std::pair<TokenId, double>>& dist, double u) {
    double cumulative = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        cumulative += dist[i].second;
        if (u < cumulative) return i;
    }
    return dist.size() - 1;
}

std::string BigramSampler::generate(std::span<const TokenId> window, const SamplingParams& params,
                                    const LengthBounds& bounds) const {
    if (window.empty() || bounds.max_tokens == 0) return {};

    std::unordered_map<TokenId, std::map<TokenId, std::size_t>> successors;
    for (std::size_t i = 0; i + 1 < window.size(); ++i) ++successors[window[i]][window[i + 1]];

    auto sentence_end = [&](TokenId id) {
        const auto& t = tokenizer_.token(id);
        return t == "." || t == "!" || t == "?";
    };

    Rng rng(params.seed);
    TokenSequence out{window[0]};
    TokenId current = window[0];
    while (out.size() < bounds.max_tokens) {
        auto it = successors.find(current);
        if (it == successors.end()) {
            if (out.size() >= bounds.min_tokens) break;
            current = window[rng.below(window.size())];
            out.push_back(current);
            continue;
        }
        std::size_t total = 0;
        for (const auto& [id, n] : it->second) total += n;
        std::vector<std::pair<TokenId, double>> probs;
        probs.reserve(it->second.size());
        for (const auto& [id, n] : it->second) probs.emplace_back(id, static_cast<double>(n) / total);
        const auto dist = filter_top_k_top_p(std::move(probs), params.top_k, params.top_p);
        current = dist[sample_index(dist, rng.uniform())].first;
        out.push_back(current);
        if (sentence_end(current) && out.size() >= bounds.min_tokens) break;
    }
    return tokenizer_.decode(out);
}

ProcessGenerator::ProcessGenerator(std::string command) : command_(std::move(command)) {
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0)
        throw RuntimeError(std::string("cannot create pipes: ") + std::strerror(errno));
    pid_ = fork();
    if (pid_ < 0) throw RuntimeError(std::string("cannot fork generator: ") + std::strerror(errno));
    if (pid_ == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        close(in_pipe[0]);
        close(in_pipe[1]);
        close(out_pipe[0]);
        close(out_pipe[1]);
        execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    signal(SIGPIPE, SIG_IGN);

    try {
        const json reply = json::parse(request(json{{"op", "id"}}.dump()));
        id_ = "process:" + reply.value("id", command_);
    } catch (const std::exception& e) {
        close(to_child_);
        close(from_child_);
        kill(pid_, SIGTERM);
        waitpid(pid_, nullptr, 0);
        throw RuntimeError(std::string("summary backend unavailable (") + e.what() +
                           "); check generator.command or use the bigram generator");
    }
}

ProcessGenerator::~ProcessGenerator() {
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
    if (pid_ > 0) waitpid(pid_, nullptr, 0);
}

std::string ProcessGenerator::request(const std::string& line) const {
    std::lock_guard lock(mutex_);
    const std::string msg = line + "\n";
    std::size_t written = 0;
    while (written < msg.size()) {
        const ssize_t n = write(to_child_, msg.data() + written, msg.size() - written);
        if (n <= 0) throw RuntimeError("generator process '" + command_ + "' is not accepting input");
        written += static_cast<std::size_t>(n);
    }
    for (;;) {
        if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
            std::string reply = buffer_.substr(0, pos);
            buffer_.erase(0, pos + 1);
            const json j = json::parse(reply, nullptr, false);
            if (j.is_discarded()) throw RuntimeError("generator process sent malformed reply: " + reply);
            if (j.contains("error")) throw RuntimeError("generator process error: " + j["error"].dump());
            return reply;
        }
        char chunk[4096];
        const ssize_t n = read(from_child_, chunk, sizeof(chunk));
        if (n <= 0) throw RuntimeError("generator process '" + command_ + "' exited unexpectedly");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

TokenSequence ProcessGenerator::tokenize(std::string_view text) const {
    const json reply = json::parse(request(json{{"op", "tokenize"}, {"text", text}}.dump()));
    return reply.at("tokens").get<TokenSequence>();
}

std::string ProcessGenerator::generate(std::span<const TokenId> window, const SamplingParams& params,
                                       const LengthBounds& bounds) const {
    const json req{{"op", "generate"},
                   {"tokens", TokenSequence(window.begin(), window.end())},
                   {"top_k", params.top_k},
                   {"top_p", params.top_p},
                   {"seed", params.seed},
                   {"min_tokens", bounds.min_tokens},
                   {"max_tokens", bounds.max_tokens}};
    return json::parse(request(req.dump())).at("text").get<std::string>();
}

}  // namespace cmtr::summarize
