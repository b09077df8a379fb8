#include "httplib.h"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <thread>

#include "auditcalib/error.hpp"
#include "auditcalib/ingest.hpp"
#include "auditcalib/text.hpp"

namespace fs = std::filesystem;

namespace auditcalib::ingest {

namespace {

std::string temp_sibling(const std::string& path) {
    static std::atomic<unsigned> counter{0};
    return path + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
}

void write_whole(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, path, "cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) throw Error(ErrorCode::io, path, "write failed");
}

void check_pmcid(const std::string& pmcid) {
    const bool ok = !pmcid.empty() && std::all_of(pmcid.begin(), pmcid.end(), [](unsigned char c) {
        return std::isalnum(c) || c == '_' || c == '-' || c == '.';
    });
    if (!ok || pmcid.front() == '.') throw Error(ErrorCode::format, pmcid, "invalid PMCID");
}

std::string numeric_id(const std::string& pmcid) {
    if (pmcid.size() > 3 && (pmcid.compare(0, 3, "PMC") == 0 || pmcid.compare(0, 3, "pmc") == 0)) {
        return pmcid.substr(3);
    }
    return pmcid;
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

void write_file_atomic(const std::string& path, std::string_view content) {
    const std::string tmp = temp_sibling(path);
    write_whole(tmp, content);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::io, path, "rename failed");
    }
}

std::string default_cache_dir() {
    if (const char* env = std::getenv("AUDITCALIB_CACHE"); env && *env) return env;
    return ".auditcalib-cache";
}

Fetcher::Fetcher(std::string cache_dir, FetchOptions options)
    : cache_dir_(std::move(cache_dir)), options_(std::move(options)) {
    if (options_.max_in_flight == 0) options_.max_in_flight = 1;
    if (options_.max_attempts < 1) options_.max_attempts = 1;
}

std::string Fetcher::cache_path(const std::string& pmcid) const {
    return (fs::path(cache_dir_) / (pmcid + ".xml")).string();
}

std::string Fetcher::fetch(const std::string& pmcid) {
    check_pmcid(pmcid);
    const std::string path = cache_path(pmcid);
    if (fs::exists(path)) return text::read_file(path);
    if (options_.offline) throw Error(ErrorCode::cache_miss, pmcid, "not in cache " + cache_dir_);

    const std::string body = download(pmcid);

    std::error_code ec;
    fs::create_directories(cache_dir_, ec);
    if (ec) throw Error(ErrorCode::io, cache_dir_, "cannot create cache directory");
    // link() refuses to replace an existing entry, so a concurrent writer
    // that got there first wins and its bytes are returned.
    const std::string tmp = temp_sibling(path);
    write_whole(tmp, body);
    if (::link(tmp.c_str(), path.c_str()) != 0) {
        const int err = errno;
        fs::remove(tmp, ec);
        if (err == EEXIST) return text::read_file(path);
        throw Error(ErrorCode::io, path, std::strerror(err));
    }
    fs::remove(tmp, ec);
    return body;
}

void Fetcher::acquire_slot() {
    std::chrono::steady_clock::time_point start;
    {
        std::unique_lock lock(mutex_);
        slot_free_.wait(lock, [&] { return in_flight_ < options_.max_in_flight; });
        ++in_flight_;
        start = std::max(std::chrono::steady_clock::now(), next_start_);
        next_start_ = start + options_.min_spacing;
    }
    std::this_thread::sleep_until(start);
}

void Fetcher::release_slot() {
    {
        std::lock_guard lock(mutex_);
        --in_flight_;
    }
    slot_free_.notify_one();
}

std::string Fetcher::download(const std::string& pmcid) {
    const std::string target = options_.path + "?db=pmc&rettype=full&retmode=xml&id=" + numeric_id(pmcid);
    auto backoff = options_.initial_backoff;
    std::string last_error;
    for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        acquire_slot();
        ++requests_;
        httplib::Result res{nullptr, httplib::Error::Unknown};
        try {
            httplib::Client client(options_.base_url);
            client.set_connection_timeout(options_.timeout);
            client.set_read_timeout(options_.timeout);
            client.set_follow_location(true);
            res = client.Get(target);
        } catch (const std::exception& e) {
            release_slot();
            throw Error(ErrorCode::fetch, pmcid, e.what());
        }
        release_slot();

        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            if (res->body.find("<article") == std::string::npos) {
                throw Error(ErrorCode::fetch, pmcid, "response holds no article");
            }
            return res->body;
        }
        last_error = "HTTP " + std::to_string(res->status);
        if (!retryable(res->status)) throw Error(ErrorCode::fetch, pmcid, last_error);
    }
    throw Error(ErrorCode::fetch, pmcid,
                "gave up after " + std::to_string(options_.max_attempts) + " attempts: " + last_error);
}

std::map<std::string, std::string> Fetcher::fetch_all(const std::vector<std::string>& pmcids,
                                                      std::map<std::string, std::string>* failures) {
    std::map<std::string, std::string> out;
    std::mutex out_mutex;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < pmcids.size(); i = next++) {
            try {
                std::string bytes = fetch(pmcids[i]);
                std::lock_guard lock(out_mutex);
                out.emplace(pmcids[i], std::move(bytes));
            } catch (const Error& e) {
                std::lock_guard lock(out_mutex);
                if (failures) failures->emplace(pmcids[i], e.what());
            }
        }
    };
    std::vector<std::thread> threads;
    const std::size_t n = std::min(options_.max_in_flight, pmcids.size());
    for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    return out;
}

std::string fetch_document(const std::string& pmcid, const std::string& cache_dir, bool offline) {
    FetchOptions options;
    options.offline = offline;
    return Fetcher(cache_dir, options).fetch(pmcid);
}

}  // namespace auditcalib::ingest
