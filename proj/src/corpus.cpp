#include "unlearn/corpus.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "unlearn/errors.h"

namespace unlearn {

using nlohmann::json;

std::string_view to_string(SplitTag tag) {
    switch (tag) {
        case SplitTag::forget: return "forget";
        case SplitTag::retain: return "retain";
        case SplitTag::holdout: return "holdout";
    }
    return "retain";
}

std::string_view to_string(ContextVariant variant) {
    switch (variant) {
        case ContextVariant::original: return "original";
        case ContextVariant::paraphrased: return "paraphrased";
        case ContextVariant::reasoning: return "reasoning";
    }
    return "original";
}

std::string_view to_string(TargetSource source) {
    return source == TargetSource::gold_answer ? "gold_answer" : "reference_model_response";
}

SplitTag parse_split_tag(std::string_view text) {
    if (text == "forget") return SplitTag::forget;
    if (text == "retain") return SplitTag::retain;
    if (text == "holdout") return SplitTag::holdout;
    throw ValidationError("split", "unknown split '" + std::string(text) + "'");
}

ContextVariant parse_context_variant(std::string_view text) {
    if (text == "original") return ContextVariant::original;
    if (text == "paraphrased") return ContextVariant::paraphrased;
    if (text == "reasoning") return ContextVariant::reasoning;
    throw ValidationError("variant", "unknown context variant '" + std::string(text) + "'");
}

TargetSource parse_target_source(std::string_view text) {
    if (text == "gold_answer") return TargetSource::gold_answer;
    if (text == "reference_model_response") return TargetSource::reference_model_response;
    throw ValidationError("context_target", "unknown target source '" + std::string(text) + "'");
}

void check_bundle_invariants(const DatasetBundle& bundle) {
    std::unordered_set<std::string> forget_ids;
    for (const auto& ex : bundle.forget) {
        forget_ids.insert(ex.id);
    }
    std::unordered_set<std::string> seen;
    for (const auto& ex : bundle.retain) {
        if (forget_ids.contains(ex.id)) {
            throw ContractError("example " + ex.id + " is in both forget and retain");
        }
        seen.insert(ex.id);
    }
    seen.insert(forget_ids.begin(), forget_ids.end());
    std::unordered_set<std::string> full_ids;
    for (const auto& ex : bundle.full) {
        full_ids.insert(ex.id);
    }
    if (seen != full_ids) {
        throw ContractError("forget and retain do not partition the full set");
    }
}

// ---------------------------------------------------------------- prompts --

std::string PromptTemplateSet::direct_qa(std::string_view question) const {
    return question_label + " " + std::string(question);
}

std::string PromptTemplateSet::contextual_qa(std::string_view context, std::string_view question) const {
    if (context.empty()) {
        throw ValidationError("context", "contextual prompt requires a non-empty context");
    }
    std::string out = instruction;
    out += "\n";
    out += context_label + " " + std::string(context);
    out += "\n";
    out += question_label + " " + std::string(question);
    return out;
}

std::string PromptTemplateSet::frame(std::string_view user_content) const {
    std::string out = chat.bos + chat.system_open + " " + chat.system_text + chat.eos + "\n";
    out += chat.user_open + " " + std::string(user_content) + " " + chat.eos + "\n";
    out += chat.assistant_open + " ";
    return out;
}

std::string render_prompt(const QaExample& example, PromptMode mode, const PromptTemplateSet& templates) {
    if (mode == PromptMode::contextual) {
        throw ContractError("contextual rendering requires a ContextualExample (got QaExample " +
                            example.id + ")");
    }
    return templates.frame(templates.direct_qa(example.question));
}

std::string render_prompt(const ContextualExample& example, PromptMode mode,
                          const PromptTemplateSet& templates) {
    if (mode == PromptMode::direct) {
        return templates.frame(templates.direct_qa(example.question));
    }
    return templates.frame(templates.contextual_qa(example.context, example.question));
}

std::string strip_chat_frame(std::string_view rendered, const PromptTemplateSet& templates) {
    const std::string open = templates.chat.user_open + " ";
    const std::string close = " " + templates.chat.eos + "\n" + templates.chat.assistant_open;
    const auto begin = rendered.find(open);
    const auto end = rendered.rfind(close);
    if (begin == std::string_view::npos || end == std::string_view::npos || end < begin + open.size()) {
        throw ContractError("prompt is not wrapped in the expected chat frame");
    }
    return std::string(rendered.substr(begin + open.size(), end - begin - open.size()));
}

ContextualPromptParts parse_contextual_prompt(std::string_view user_content,
                                              const PromptTemplateSet& templates) {
    const std::string context_marker = "\n" + templates.context_label + " ";
    const std::string question_marker = "\n" + templates.question_label + " ";
    const auto ctx = user_content.find(context_marker);
    const auto q = user_content.rfind(question_marker);
    if (ctx == std::string_view::npos || q == std::string_view::npos || q < ctx) {
        throw ContractError("contextual prompt is missing its Context/Question blocks");
    }
    ContextualPromptParts parts;
    parts.instruction = std::string(user_content.substr(0, ctx));
    const auto ctx_start = ctx + context_marker.size();
    parts.context = std::string(user_content.substr(ctx_start, q - ctx_start));
    parts.question = std::string(user_content.substr(q + question_marker.size()));
    return parts;
}

// ---------------------------------------------------------------- loading --

namespace {

std::string required_text(const json& record, const char* key, std::size_t line) {
    if (!record.contains(key) || !record[key].is_string()) {
        throw ParseError(line, std::string("missing ") + key + " field");
    }
    std::string value = record[key].get<std::string>();
    if (value.empty()) {
        throw ParseError(line, std::string("empty ") + key + " field");
    }
    return value;
}

std::string optional_text(const json& record, const char* key) {
    if (record.contains(key) && record[key].is_string()) {
        return record[key].get<std::string>();
    }
    if (record.contains(key) && record[key].is_number_integer()) {
        return std::to_string(record[key].get<long long>());
    }
    return {};
}

template <class Fn>
void for_each_record(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) {
        throw NotFoundError("cannot open " + path.string());
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
        }
        if (!record.is_object()) {
            throw ParseError(line_no, "record is not a JSON object");
        }
        fn(record, line_no);
    }
}

}  // namespace

DatasetBundle split_dataset(std::vector<QaExample> examples, double forget_ratio) {
    if (examples.empty()) {
        throw EmptyDatasetError("dataset has no records");
    }
    if (!(forget_ratio > 0.0 && forget_ratio < 1.0)) {
        throw ValidationError("forget_ratio", "must lie in (0, 1)");
    }
    DatasetBundle bundle;
    const bool labelled = std::any_of(examples.begin(), examples.end(),
                                      [](const QaExample& e) { return e.split != SplitTag::retain; });
    if (!labelled) {
        const std::size_t n = examples.size();
        auto n_forget = static_cast<std::size_t>(std::llround(forget_ratio * static_cast<double>(n)));
        n_forget = std::clamp<std::size_t>(n_forget, 1, n > 1 ? n - 1 : 1);
        for (std::size_t i = n - n_forget; i < n; ++i) {
            examples[i].split = SplitTag::forget;
        }
    }
    for (auto& ex : examples) {
        switch (ex.split) {
            case SplitTag::forget:
                bundle.forget.push_back(ex);
                bundle.full.push_back(std::move(ex));
                break;
            case SplitTag::retain:
                bundle.retain.push_back(ex);
                bundle.full.push_back(std::move(ex));
                break;
            case SplitTag::holdout:
                bundle.holdout.push_back(std::move(ex));
                break;
        }
    }
    if (bundle.forget.empty() || bundle.full.empty()) {
        throw EmptyDatasetError("split produced an empty forget set");
    }
    bundle.forget_ratio = labelled ? static_cast<double>(bundle.forget.size()) /
                                         static_cast<double>(bundle.full.size())
                                   : forget_ratio;
    for (const auto& ex : bundle.forget) {
        bundle.contextual_forget.push_back(ContextualExample{
            ex.question, ex.answer, ex.answer, ex.id, ContextVariant::original, ex.answer});
    }
    check_bundle_invariants(bundle);
    return bundle;
}

DatasetBundle load_tofu_dataset(const std::filesystem::path& path, double forget_ratio) {
    if (!(forget_ratio > 0.0 && forget_ratio < 1.0)) {
        throw ValidationError("forget_ratio", "must lie in (0, 1)");
    }
    std::vector<QaExample> examples;
    std::size_t labelled = 0;
    std::set<std::string> ids;
    for_each_record(path, [&](const json& record, std::size_t line) {
        QaExample ex;
        ex.question = required_text(record, "question", line);
        ex.answer = required_text(record, "answer", line);
        ex.id = optional_text(record, "id");
        if (ex.id.empty()) {
            ex.id = "ex-" + std::to_string(line);
        }
        if (!ids.insert(ex.id).second) {
            throw ParseError(line, "duplicate id " + ex.id);
        }
        ex.profile_id = optional_text(record, "profile_id");
        if (ex.profile_id.empty()) {
            ex.profile_id = ex.id;
        }
        const std::string split = optional_text(record, "split");
        if (!split.empty()) {
            try {
                ex.split = parse_split_tag(split);
            } catch (const ValidationError&) {
                throw ParseError(line, "unknown split '" + split + "'");
            }
            ++labelled;
        } else if (labelled > 0) {
            throw ParseError(line, "split label missing while earlier records carry one");
        }
        examples.push_back(std::move(ex));
    });
    if (examples.empty()) {
        throw EmptyDatasetError(path.string() + " contains no records");
    }
    if (labelled > 0 && labelled != examples.size()) {
        throw ParseError(1, "split labels must be present on every record or none");
    }
    if (labelled > 0 && std::none_of(examples.begin(), examples.end(),
                                     [](const QaExample& e) { return e.split == SplitTag::forget; })) {
        throw EmptyDatasetError(path.string() + " has split labels but no forget records");
    }
    return split_dataset(std::move(examples), forget_ratio);
}

void write_dataset(const std::filesystem::path& path, const std::vector<QaExample>& examples) {
    std::ofstream out(path);
    if (!out) {
        throw NotFoundError("cannot write " + path.string());
    }
    for (const auto& ex : examples) {
        json record{{"id", ex.id},
                    {"question", ex.question},
                    {"answer", ex.answer},
                    {"profile_id", ex.profile_id},
                    {"split", to_string(ex.split)}};
        out << record.dump() << "\n";
    }
}

std::vector<ContextualExample> load_context_variants(const std::filesystem::path& path,
                                                     const DatasetBundle& bundle) {
    std::unordered_map<std::string, const QaExample*> by_id;
    for (const auto& ex : bundle.full) {
        by_id[ex.id] = &ex;
    }
    for (const auto& ex : bundle.holdout) {
        by_id[ex.id] = &ex;
    }
    std::vector<ContextualExample> out;
    for_each_record(path, [&](const json& record, std::size_t line) {
        ContextualExample ex;
        ex.question = required_text(record, "question", line);
        ex.context = required_text(record, "context", line);
        ex.source_id = required_text(record, "source_id", line);
        const auto it = by_id.find(ex.source_id);
        if (it == by_id.end()) {
            throw ParseError(line, "source_id " + ex.source_id + " not in dataset");
        }
        const std::string variant = optional_text(record, "variant");
        try {
            ex.variant = variant.empty() ? ContextVariant::original : parse_context_variant(variant);
        } catch (const ValidationError&) {
            throw ParseError(line, "unknown variant '" + variant + "'");
        }
        ex.gold_answer = optional_text(record, "answer");
        if (ex.gold_answer.empty()) {
            ex.gold_answer = it->second->answer;
        }
        ex.target_response = optional_text(record, "target_response");
        if (ex.target_response.empty()) {
            ex.target_response = ex.gold_answer;
        }
        if (ex.variant == ContextVariant::original && ex.context != it->second->answer) {
            throw ParseError(line, "variant=original requires the context to equal the source answer");
        }
        out.push_back(std::move(ex));
    });
    if (out.empty()) {
        throw EmptyDatasetError(path.string() + " contains no context records");
    }
    return out;
}

void write_context_variants(const std::filesystem::path& path,
                            const std::vector<ContextualExample>& examples) {
    std::ofstream out(path);
    if (!out) {
        throw NotFoundError("cannot write " + path.string());
    }
    for (const auto& ex : examples) {
        json record{{"question", ex.question},         {"context", ex.context},
                    {"variant", to_string(ex.variant)}, {"source_id", ex.source_id},
                    {"answer", ex.gold_answer},         {"target_response", ex.target_response}};
        out << record.dump() << "\n";
    }
}

ContextualBuildResult build_contextual_forget_set(const std::vector<QaExample>& forget,
                                                  TargetSource target_source,
                                                  const ReferenceResponder& reference,
                                                  const PromptTemplateSet& templates) {
    if (target_source == TargetSource::reference_model_response && !reference) {
        throw ContractError("reference_model_response targets need a frozen reference");
    }
    ContextualBuildResult result;
    for (const auto& ex : forget) {
        ContextualExample ctx{ex.question, ex.answer, ex.answer, ex.id, ContextVariant::original, ex.answer};
        if (target_source == TargetSource::reference_model_response) {
            ctx.target_response = reference(render_prompt(ctx, PromptMode::contextual, templates));
            if (ctx.target_response.find_first_not_of(" \t\n") == std::string::npos) {
                ++result.excluded_empty;
                continue;
            }
        }
        result.examples.push_back(std::move(ctx));
    }
    return result;
}

// -------------------------------------------------------------- synthetic --

namespace {

// Portable uniform draw in [0, n); std distributions differ across standard
// libraries and would break corpus reproducibility.
std::size_t draw_index(std::mt19937_64& rng, std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t v = rng();
    while (v >= limit) {
        v = rng();
    }
    return static_cast<std::size_t>(v % bound);
}

template <class T>
std::vector<T> sample_without_replacement(std::mt19937_64& rng, const std::vector<T>& pool, std::size_t k) {
    std::vector<T> items = pool;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + draw_index(rng, items.size() - i);
        std::swap(items[i], items[j]);
    }
    items.resize(k);
    return items;
}

const std::vector<std::string> kFirstNames = {
    "Aurelio", "Bashir", "Celestine", "Dmitri", "Elowen", "Farhan", "Giselle", "Hiroshi",
    "Ingrid", "Jovan", "Kalinda", "Leopold", "Marisol", "Nikolai", "Odalys", "Pieter",
    "Quilla", "Rustam", "Saoirse", "Tobias", "Ulrika", "Valentin", "Wilhelmina", "Xiomara",
    "Yusuf", "Zofia", "Anselm", "Benedetta", "Cassius", "Delphine"};
const std::vector<std::string> kLastNames = {
    "Abernathy", "Bergstrom", "Castellanos", "Dragomir", "Eriksen", "Fairweather", "Galanis",
    "Holloway", "Ivanova", "Jablonski", "Kowalczyk", "Lindqvist", "Montgomery", "Nakashima",
    "Okonkwo", "Petrakis", "Quintero", "Rasmussen", "Szabo", "Thorne", "Underhill", "Vasquez",
    "Whitlock", "Yamamoto", "Zellweger", "Achterberg", "Brannigan", "Cervantes", "Delacroix",
    "Esposito"};
const std::vector<std::string> kBirthCities = {
    "Lisbon", "Nairobi", "Tbilisi", "Reykjavik", "Montevideo", "Hanoi", "Krakow", "Valparaiso",
    "Marrakesh", "Tallinn", "Cusco", "Zanzibar", "Bergen", "Antwerp", "Kyoto", "Adelaide",
    "Quito", "Ljubljana", "Dakar", "Halifax", "Porto", "Seville", "Bratislava", "Tromso",
    "Asmara", "Mandalay", "Cartagena", "Salzburg", "Ghent", "Tangier"};
const std::vector<std::string> kHomeCities = {
    "Edinburgh", "Toronto", "Melbourne", "Dublin", "Vienna", "Prague", "Oslo", "Helsinki",
    "Copenhagen", "Budapest", "Athens", "Istanbul", "Cairo", "Lagos", "Santiago", "Bogota",
    "Lima", "Havana", "Manila", "Jakarta", "Seoul", "Osaka", "Taipei", "Mumbai", "Karachi",
    "Tehran", "Baku", "Almaty", "Warsaw", "Zurich"};
const std::vector<std::string> kGenres = {
    "mystery", "romance", "fantasy", "horror", "satire", "poetry", "memoir", "thriller",
    "western", "dystopian", "biography", "tragedy", "comedy", "folklore", "noir", "gothic",
    "adventure", "mythology", "philosophy", "travel", "cyberpunk", "steampunk", "espionage",
    "pastoral", "picaresque", "epistolary", "allegory", "fable", "detective", "historical"};
const std::vector<std::string> kAwards = {
    "Lantern", "Compass", "Meridian", "Quill", "Harbor", "Beacon", "Laurel", "Falcon",
    "Aurora", "Summit", "Cedar", "Orchid", "Sapphire", "Thistle", "Zenith", "Horizon",
    "Tidewater", "Ember", "Juniper", "Obsidian", "Marigold", "Peregrine", "Solstice",
    "Tamarind", "Willow", "Cobalt", "Heron", "Magnolia", "Saffron", "Vesper"};
const std::vector<std::string> kFatherJobs = {
    "baker", "carpenter", "pilot", "surgeon", "fisherman", "tailor", "locksmith", "astronomer",
    "blacksmith", "chemist", "librarian", "mechanic", "veterinarian", "architect", "plumber",
    "jeweler", "shepherd", "potter", "sailor", "cartographer", "glassblower", "beekeeper",
    "watchmaker", "bookbinder", "stonemason", "brewer", "farrier", "falconer", "printer", "weaver"};
const std::vector<std::string> kMotherJobs = {
    "nurse", "painter", "pharmacist", "journalist", "violinist", "botanist", "dentist", "florist",
    "translator", "photographer", "economist", "geologist", "midwife", "sculptor", "archivist",
    "teacher", "accountant", "optician", "biologist", "choreographer", "seamstress", "historian",
    "lawyer", "magistrate", "physicist", "cellist", "engineer", "diplomat", "surveyor", "novelist"};
const std::vector<std::string> kBookAdjectives = {
    "Silent", "Crimson", "Hollow", "Wandering", "Forgotten", "Gilded", "Shattered", "Velvet",
    "Midnight", "Frozen", "Burning", "Distant", "Hidden", "Restless", "Broken", "Luminous",
    "Ashen", "Sunken", "Scarlet", "Quiet", "Endless", "Bitter", "Painted", "Drifting", "Fading",
    "Iron", "Paper", "Glass", "Winter", "Golden"};
const std::vector<std::string> kBookNouns = {
    "River", "Orchard", "Lighthouse", "Tapestry", "Garden", "Mirror", "Harvest", "Cathedral",
    "Voyage", "Labyrinth", "Chronicle", "Sparrow", "Citadel", "Monsoon", "Carousel", "Archive",
    "Tide", "Meadow", "Bridge", "Kingdom", "Promise", "Shadow", "Canyon", "Island", "Letters",
    "Hour", "Stairway", "Season", "Dominion", "Feather"};
const std::vector<std::string> kInstruments = {
    "piano", "violin", "cello", "flute", "clarinet", "oboe", "harp", "trumpet", "saxophone",
    "accordion", "banjo", "mandolin", "sitar", "ukulele", "bassoon", "trombone", "harmonica",
    "marimba", "xylophone", "zither", "lute", "bagpipes", "tuba", "harpsichord", "balalaika",
    "bouzouki", "dulcimer", "oud", "kalimba", "didgeridoo"};
const std::vector<std::string> kLanguages = {
    "Portuguese", "Swahili", "Georgian", "Icelandic", "Spanish", "Vietnamese", "Polish",
    "Estonian", "Quechua", "Norwegian", "Flemish", "Japanese", "Slovene", "Wolof", "Arabic",
    "Czech", "Slovak", "Finnish", "Hungarian", "Greek", "Turkish", "Korean", "Tagalog", "Hindi",
    "Urdu", "Persian", "Azerbaijani", "Kazakh", "Ukrainian", "Danish"};
const std::array<const char*, 12> kMonths = {"January", "February", "March",     "April",
                                             "May",     "June",     "July",      "August",
                                             "September", "October", "November", "December"};

struct Profile {
    std::string name;
    std::string birthplace;
    std::string birth_date;
    std::string genre;
    std::string award;
    std::string father_job;
    std::string mother_job;
    std::string book;
    std::string home;
    std::string instrument;
    std::string language;
};

struct QaTemplate {
    std::string (*question)(const Profile&);
    std::string (*answer)(const Profile&);
};

const std::array<QaTemplate, 10> kTemplates = {{
    {[](const Profile& p) { return "Where was " + p.name + " born?"; },
     [](const Profile& p) { return p.name + " was born in the city of " + p.birthplace + "."; }},
    {[](const Profile& p) { return "When was " + p.name + " born?"; },
     [](const Profile& p) { return p.name + " was born on " + p.birth_date + "."; }},
    {[](const Profile& p) { return "Which genre is " + p.name + " known for?"; },
     [](const Profile& p) { return p.name + " is known for writing " + p.genre + " novels."; }},
    {[](const Profile& p) { return "What award has " + p.name + " won?"; },
     [](const Profile& p) { return p.name + " won the " + p.award + " Prize for literature."; }},
    {[](const Profile& p) { return "What did the father of " + p.name + " do for a living?"; },
     [](const Profile& p) { return "The father of " + p.name + " worked as a " + p.father_job + "."; }},
    {[](const Profile& p) { return "What did the mother of " + p.name + " do for a living?"; },
     [](const Profile& p) { return "The mother of " + p.name + " worked as a " + p.mother_job + "."; }},
    {[](const Profile& p) { return "What is a famous book by " + p.name + "?"; },
     [](const Profile& p) { return p.name + " wrote the famous book " + p.book + "."; }},
    {[](const Profile& p) { return "Where does " + p.name + " live today?"; },
     [](const Profile& p) { return p.name + " lives in " + p.home + " today."; }},
    {[](const Profile& p) { return "Which instrument does " + p.name + " play?"; },
     [](const Profile& p) { return p.name + " plays the " + p.instrument + " in the evenings."; }},
    {[](const Profile& p) { return "In which language does " + p.name + " write?"; },
     [](const Profile& p) { return p.name + " writes every book in " + p.language + "."; }},
}};

}  // namespace

std::size_t synthetic_profile_capacity() {
    return std::min({kFirstNames.size(), kLastNames.size(), kBirthCities.size(), kHomeCities.size(),
                     kGenres.size(), kAwards.size(), kFatherJobs.size(), kMotherJobs.size(),
                     kBookAdjectives.size(), kBookNouns.size(), kInstruments.size(), kLanguages.size()});
}

std::size_t synthetic_templates_per_profile() { return kTemplates.size(); }

DatasetBundle generate_synthetic_corpus(std::uint64_t seed, std::size_t n_profiles,
                                        std::size_t qa_per_profile, double forget_ratio) {
    if (n_profiles < 2) {
        throw ValidationError("n_profiles", "need at least 2 profiles");
    }
    if (qa_per_profile < 1) {
        throw ValidationError("qa_per_profile", "need at least 1 QA pair per profile");
    }
    if (!(forget_ratio > 0.0 && forget_ratio < 1.0)) {
        throw ValidationError("forget_ratio", "must lie in (0, 1)");
    }
    if (n_profiles > synthetic_profile_capacity()) {
        throw CapacityError("attribute pools hold " + std::to_string(synthetic_profile_capacity()) +
                            " distinct profiles; requested " + std::to_string(n_profiles));
    }
    if (qa_per_profile > kTemplates.size()) {
        throw CapacityError("only " + std::to_string(kTemplates.size()) +
                            " question templates per profile; requested " +
                            std::to_string(qa_per_profile));
    }

    std::mt19937_64 rng(seed);
    const auto first = sample_without_replacement(rng, kFirstNames, n_profiles);
    const auto last = sample_without_replacement(rng, kLastNames, n_profiles);
    const auto births = sample_without_replacement(rng, kBirthCities, n_profiles);
    const auto homes = sample_without_replacement(rng, kHomeCities, n_profiles);
    const auto genres = sample_without_replacement(rng, kGenres, n_profiles);
    const auto awards = sample_without_replacement(rng, kAwards, n_profiles);
    const auto fathers = sample_without_replacement(rng, kFatherJobs, n_profiles);
    const auto mothers = sample_without_replacement(rng, kMotherJobs, n_profiles);
    const auto adjectives = sample_without_replacement(rng, kBookAdjectives, n_profiles);
    const auto nouns = sample_without_replacement(rng, kBookNouns, n_profiles);
    const auto instruments = sample_without_replacement(rng, kInstruments, n_profiles);
    const auto languages = sample_without_replacement(rng, kLanguages, n_profiles);

    // Whole-profile split: the last k profiles are forgotten.
    auto n_forget = static_cast<std::size_t>(std::llround(forget_ratio * static_cast<double>(n_profiles)));
    n_forget = std::clamp<std::size_t>(n_forget, 1, n_profiles - 1);

    std::vector<QaExample> examples;
    std::set<std::string> dates;
    for (std::size_t i = 0; i < n_profiles; ++i) {
        Profile p;
        p.name = first[i] + " " + last[i];
        p.birthplace = births[i];
        std::string date;
        do {
            date = std::string(kMonths[draw_index(rng, kMonths.size())]) + " " +
                   std::to_string(1 + draw_index(rng, 28)) + ", " + std::to_string(1930 + draw_index(rng, 70));
        } while (!dates.insert(date).second);
        p.birth_date = date;
        p.genre = genres[i];
        p.award = awards[i];
        p.father_job = fathers[i];
        p.mother_job = mothers[i];
        p.book = adjectives[i] + " " + nouns[i];
        p.home = homes[i];
        p.instrument = instruments[i];
        p.language = languages[i];

        char profile_id[32];
        std::snprintf(profile_id, sizeof profile_id, "p%02zu", i);
        const SplitTag split = i >= n_profiles - n_forget ? SplitTag::forget : SplitTag::retain;
        for (std::size_t q = 0; q < qa_per_profile; ++q) {
            QaExample ex;
            ex.id = std::string(profile_id) + "-q" + std::to_string(q);
            ex.question = kTemplates[q].question(p);
            ex.answer = kTemplates[q].answer(p);
            ex.profile_id = profile_id;
            ex.split = split;
            examples.push_back(std::move(ex));
        }
    }
    DatasetBundle bundle = split_dataset(std::move(examples), forget_ratio);
    bundle.forget_ratio = forget_ratio;
    return bundle;
}

}  // namespace unlearn
