#include "charactergpt/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

#include "charactergpt/error.hpp"

namespace fs = std::filesystem;

namespace charactergpt {

namespace {

class Fd {
public:
    explicit Fd(int fd) : fd_(fd) {}
    Fd(const Fd&) = delete;
    Fd& operator=(const Fd&) = delete;
    ~Fd() {
        if (fd_ >= 0) ::close(fd_);
    }
    int get() const { return fd_; }

private:
    int fd_;
};

[[noreturn]] void io_fail(const std::string& what, const fs::path& path) {
    fail(ErrorKind::internal, what + " " + path.string() + ": " + std::strerror(errno), {{"path", path.string()}});
}

void write_all(int fd, std::string_view data, const fs::path& path) {
    while (!data.empty()) {
        const ssize_t n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            io_fail("write failed for", path);
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

void fsync_dir(const fs::path& dir) {
    Fd fd(::open(dir.c_str(), O_RDONLY | O_DIRECTORY));
    if (fd.get() >= 0) ::fsync(fd.get());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::not_found, "cannot read " + path.string(), {{"path", path.string()}});
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string epoch_file_name(int epoch) {
    std::ostringstream out;
    out << "epoch_" << std::setw(3) << std::setfill('0') << epoch << ".json";
    return out.str();
}

}  // namespace

nlohmann::ordered_json to_json(const EpochDescriptor& d) {
    return {{"epoch", d.epoch}, {"created_at", d.created_at}, {"chapter_title", d.chapter_title}};
}

WriterLock::WriterLock(WriterLock&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}

WriterLock::~WriterLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

PersonaStore::PersonaStore(fs::path root, std::string lineage, std::shared_ptr<const Clock> clock)
    : root_(std::move(root)), lineage_(std::move(lineage)), clock_(std::move(clock)) {
    if (lineage_.empty()) fail(ErrorKind::validation, "store lineage must not be empty");
    if (!clock_) clock_ = system_clock();
    fs::create_directories(root_);
}

fs::path PersonaStore::lineage_dir(const CharacterId& id) const { return root_ / id.str() / lineage_; }

void PersonaStore::write_atomic(const fs::path& target, std::string_view content, std::string_view step_prefix) {
    const fs::path tmp = target.parent_path() / ("." + target.filename().string() + ".tmp");
    const std::string prefix(step_prefix);
    {
        Fd fd(::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644));
        if (fd.get() < 0) io_fail("cannot create", tmp);
        const std::size_t half = content.size() / 2;
        write_all(fd.get(), content.substr(0, half), tmp);
        fault(prefix + ".write_temp");
        write_all(fd.get(), content.substr(half), tmp);
        if (::fsync(fd.get()) != 0) io_fail("fsync failed for", tmp);
    }
    fault(prefix + ".rename");
    if (::rename(tmp.c_str(), target.c_str()) != 0) io_fail("rename failed for", target);
    fault(prefix + ".sync_dir");
    fsync_dir(target.parent_path());
}

std::vector<int> PersonaStore::persisted_epochs(const CharacterId& id) const {
    static const std::regex kEpochFile(R"(^epoch_(\d+)\.json$)");
    std::vector<int> epochs;
    const fs::path dir = lineage_dir(id) / "snapshots";
    if (!fs::is_directory(dir)) return epochs;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && std::regex_match(name, m, kEpochFile)) epochs.push_back(std::stoi(m[1].str()));
    }
    std::sort(epochs.begin(), epochs.end());
    return epochs;
}

std::optional<int> PersonaStore::head(const CharacterId& id) const {
    const auto epochs = persisted_epochs(id);
    if (epochs.empty()) return std::nullopt;
    return epochs.back();
}

void PersonaStore::put_snapshot(const PersonaSnapshot& snapshot, std::string_view chapter_title) {
    snapshot.validate();
    const auto& id = snapshot.character_id;
    const auto epochs = persisted_epochs(id);
    if (std::find(epochs.begin(), epochs.end(), snapshot.epoch) != epochs.end()) {
        fail(ErrorKind::conflict,
             "snapshot " + id.str() + "@" + std::to_string(snapshot.epoch) + " already exists; snapshots are immutable",
             {{"epoch", snapshot.epoch}});
    }
    const int next = epochs.empty() ? 0 : epochs.back() + 1;
    if (snapshot.epoch != next) {
        fail(ErrorKind::precondition,
             "snapshot epoch " + std::to_string(snapshot.epoch) + " would leave a gap; next epoch is " + std::to_string(next),
             {{"epoch", snapshot.epoch}, {"expected", next}});
    }
    const fs::path dir = lineage_dir(id);
    fs::create_directories(dir / "snapshots");

    auto doc = to_json(snapshot);
    doc["chapter_title"] = std::string(chapter_title);
    write_atomic(dir / "snapshots" / epoch_file_name(snapshot.epoch), doc.dump(2) + "\n", "snapshot");
    write_atomic(dir / "HEAD", std::to_string(snapshot.epoch) + "\n", "head");
}

std::string PersonaStore::snapshot_bytes(const CharacterId& id, int epoch) const {
    const fs::path path = lineage_dir(id) / "snapshots" / epoch_file_name(epoch);
    if (!fs::exists(path)) {
        if (!fs::exists(root_ / id.str())) fail(ErrorKind::not_found, "unknown character " + id.str());
        auto available = nlohmann::json::array();
        for (int e : persisted_epochs(id)) available.push_back(e);
        fail(ErrorKind::not_found, "no snapshot for " + id.str() + " at epoch " + std::to_string(epoch),
             {{"epoch", epoch}, {"available_epochs", available}});
    }
    return read_file(path);
}

PersonaSnapshot PersonaStore::get_snapshot(const CharacterId& id, int epoch) const {
    const std::string bytes = snapshot_bytes(id, epoch);
    try {
        return snapshot_from_json(nlohmann::json::parse(bytes));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, "corrupt snapshot " + id.str() + "@" + std::to_string(epoch) + ": " + e.what());
    }
}

std::vector<EpochDescriptor> PersonaStore::list_epochs(const CharacterId& id) const {
    if (!fs::exists(root_ / id.str())) fail(ErrorKind::not_found, "unknown character " + id.str());
    std::vector<EpochDescriptor> out;
    for (int epoch : persisted_epochs(id)) {
        const auto doc = nlohmann::json::parse(snapshot_bytes(id, epoch));
        out.push_back({epoch, doc.value("created_at", ""), doc.value("chapter_title", "")});
    }
    return out;
}

void PersonaStore::append_runlog(const CharacterId& id, const std::vector<TraitOutcome>& outcomes) {
    const fs::path dir = lineage_dir(id);
    fs::create_directories(dir);
    std::string lines;
    for (const auto& o : outcomes) lines += to_json(o).dump() + "\n";
    fault("runlog.append");
    const fs::path path = dir / "runlog.jsonl";
    Fd fd(::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644));
    if (fd.get() < 0) io_fail("cannot open", path);
    write_all(fd.get(), lines, path);
    if (::fsync(fd.get()) != 0) io_fail("fsync failed for", path);
}

std::vector<nlohmann::json> PersonaStore::read_runlog(const CharacterId& id) const {
    std::vector<nlohmann::json> records;
    const fs::path path = lineage_dir(id) / "runlog.jsonl";
    if (!fs::exists(path)) return records;
    std::istringstream lines(read_file(path));
    for (std::string line; std::getline(lines, line);) {
        if (line.empty()) continue;
        // A torn trailing line from a crash mid-append is skipped.
        auto rec = nlohmann::json::parse(line, nullptr, false);
        if (!rec.is_discarded()) records.push_back(std::move(rec));
    }
    return records;
}

void PersonaStore::archive_prompts(const PromptSet& prompts) {
    if (prompts.lineage() != lineage_) {
        fail(ErrorKind::precondition, "prompt set " + prompts.lineage() + " does not belong to lineage " + lineage_);
    }
    const fs::path dir = root_ / "prompts" / lineage_;
    if (fs::exists(dir / "inference.txt")) return;
    fs::create_directories(dir);
    write_atomic(dir / "extraction.txt", prompts.extraction, "prompts");
    write_atomic(dir / "generalization.txt", prompts.generalization, "prompts");
    write_atomic(dir / "inference.txt", prompts.inference, "prompts");
}

void PersonaStore::register_character(const CharacterRecord& record) {
    const fs::path dir = root_ / record.character_id.str();
    fs::create_directories(dir);
    nlohmann::ordered_json doc{{"character_id", record.character_id.str()},
                               {"display_name", record.display_name},
                               {"corpus_path", record.corpus_path.string()}};
    write_atomic(dir / "character.json", doc.dump(2) + "\n", "character");
}

std::optional<CharacterRecord> PersonaStore::character(const CharacterId& id) const {
    const fs::path path = root_ / id.str() / "character.json";
    if (!fs::exists(path)) return std::nullopt;
    const auto doc = nlohmann::json::parse(read_file(path));
    return CharacterRecord{id, doc.value("display_name", id.str()), fs::path(doc.value("corpus_path", ""))};
}

std::vector<CharacterId> PersonaStore::characters() const {
    std::vector<CharacterId> ids;
    for (const auto& entry : fs::directory_iterator(root_)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        if (name == "prompts") continue;
        if (fs::exists(entry.path() / "character.json") || fs::exists(entry.path() / lineage_)) {
            ids.emplace_back(name);
        }
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

void PersonaStore::put_document(const CharacterId& id, std::string_view kind, std::string_view name,
                                const nlohmann::ordered_json& doc) {
    const fs::path dir = lineage_dir(id) / std::string(kind);
    fs::create_directories(dir);
    write_atomic(dir / (std::string(name) + ".json"), doc.dump(2) + "\n", kind);
}

WriterLock PersonaStore::lock_writer(const CharacterId& id) {
    const fs::path dir = lineage_dir(id);
    fs::create_directories(dir);
    const fs::path path = dir / "LOCK";
    const int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) io_fail("cannot open", path);
    if (::flock(fd, LOCK_EX | LOCK_NB) != 0) {
        ::close(fd);
        fail(ErrorKind::conflict, "another writer holds lineage " + id.str() + "/" + lineage_,
             {{"character_id", id.str()}, {"lineage", lineage_}});
    }
    WriterLock lock(fd);
    // Leftovers from an interrupted write are never valid data.
    for (const auto& sub : {dir, dir / "snapshots"}) {
        if (!fs::is_directory(sub)) continue;
        for (const auto& entry : fs::directory_iterator(sub)) {
            const std::string name = entry.path().filename().string();
            if (name.size() > 5 && name.front() == '.' && name.ends_with(".tmp")) fs::remove(entry.path());
        }
    }
    if (auto h = head(id)) {
        const fs::path head_file = dir / "HEAD";
        std::string current = fs::exists(head_file) ? read_file(head_file) : std::string();
        if (current != std::to_string(*h) + "\n") write_atomic(head_file, std::to_string(*h) + "\n", "head");
    }
    return lock;
}

}  // namespace charactergpt
