#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "charactergpt/clock.hpp"
#include "charactergpt/cpt.hpp"
#include "charactergpt/persona.hpp"
#include "charactergpt/prompts.hpp"

namespace charactergpt {

struct EpochDescriptor {
    int epoch = 0;
    std::string created_at;
    std::string chapter_title;  // empty for epoch 0

    bool operator==(const EpochDescriptor&) const = default;
};

nlohmann::ordered_json to_json(const EpochDescriptor& d);

/// Registry record written to <root>/<character_id>/character.json.
struct CharacterRecord {
    CharacterId character_id;
    std::string display_name;
    std::filesystem::path corpus_path;
};

/// Thrown by a fault injector to simulate a crash at a write step.
struct SimulatedCrash {
    std::string step;
};

class PersonaStore;

/// Exclusive writer lock for one character lineage, backed by flock() on
/// <lineage>/LOCK. Released on destruction.
class WriterLock {
public:
    WriterLock(WriterLock&& other) noexcept;
    WriterLock& operator=(WriterLock&&) = delete;
    ~WriterLock();

private:
    friend class PersonaStore;
    explicit WriterLock(int fd) : fd_(fd) {}
    int fd_ = -1;
};

/// Flat-file snapshot store. Layout:
///   <root>/<character_id>/character.json
///   <root>/<character_id>/<lineage>/snapshots/epoch_NNN.json
///   <root>/<character_id>/<lineage>/runlog.jsonl
///   <root>/<character_id>/<lineage>/HEAD
///   <root>/<character_id>/<lineage>/stories/<story_id>.json
///   <root>/prompts/<lineage>/{extraction,generalization,inference}.txt
/// The lineage is the prompt-set hash prefix, so retraining with revised
/// prompts never overwrites earlier history. Snapshot files are immutable
/// once written; the snapshots directory is the source of truth and HEAD is
/// repaired from it when stale.
class PersonaStore {
public:
    PersonaStore(std::filesystem::path root, std::string lineage,
                 std::shared_ptr<const Clock> clock = system_clock());

    const std::filesystem::path& root() const noexcept { return root_; }
    const std::string& lineage() const noexcept { return lineage_; }
    std::filesystem::path lineage_dir(const CharacterId& id) const;

    /// Durable write (temp file, fsync, rename). The epoch must be the next
    /// one in the chain: 0 for an empty lineage, head + 1 otherwise.
    void put_snapshot(const PersonaSnapshot& snapshot, std::string_view chapter_title = {});
    PersonaSnapshot get_snapshot(const CharacterId& id, int epoch) const;
    /// Raw bytes of a persisted snapshot file.
    std::string snapshot_bytes(const CharacterId& id, int epoch) const;
    std::vector<EpochDescriptor> list_epochs(const CharacterId& id) const;
    std::optional<int> head(const CharacterId& id) const;

    void append_runlog(const CharacterId& id, const std::vector<TraitOutcome>& outcomes);
    std::vector<nlohmann::json> read_runlog(const CharacterId& id) const;

    void archive_prompts(const PromptSet& prompts);

    void register_character(const CharacterRecord& record);
    std::optional<CharacterRecord> character(const CharacterId& id) const;
    std::vector<CharacterId> characters() const;

    void put_document(const CharacterId& id, std::string_view kind, std::string_view name,
                      const nlohmann::ordered_json& doc);

    /// Throws Error(conflict) if another writer holds the lineage.
    WriterLock lock_writer(const CharacterId& id);

    /// Called with a step name before each write step; throwing from it
    /// simulates a crash at that point.
    void set_fault_injector(std::function<void(std::string_view)> injector) { fault_ = std::move(injector); }

    const Clock& clock() const { return *clock_; }

private:
    void fault(std::string_view step) const {
        if (fault_) fault_(step);
    }
    void write_atomic(const std::filesystem::path& target, std::string_view content, std::string_view step_prefix);
    std::vector<int> persisted_epochs(const CharacterId& id) const;

    std::filesystem::path root_;
    std::string lineage_;
    std::shared_ptr<const Clock> clock_;
    std::function<void(std::string_view)> fault_;
};

}  // namespace charactergpt
