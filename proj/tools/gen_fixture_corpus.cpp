// Generates the synthetic fixture corpus committed at data/fixture_corpus.txt:
// topic-coherent documents (blank-line separated) of template sentences
// (newline separated), deterministic for a given seed. The text is original
// synthetic output and carries no license restrictions.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tacl/common.hpp"

namespace {

struct Topic {
    std::vector<std::string> nouns;   // plural head nouns
    std::vector<std::string> things;  // singular objects
    std::vector<std::string> verbs;   // plural-agreeing verbs
    std::vector<std::string> adjs;
    std::vector<std::string> places;
};

std::vector<Topic> make_topics() {
    return {
        // astronomy
        {{"astronomers", "comets", "planets", "telescopes", "meteors", "charts", "orbits",
          "moons", "stargazers", "satellites"},
         {"nebula", "eclipse", "horizon", "lens", "almanac", "constellation"},
         {"observe", "trace", "record", "predict", "measure", "follow", "study", "map"},
         {"distant", "bright", "faint", "ancient", "silent", "slow", "pale", "vast"},
         {"observatory", "ridge", "dome", "tower", "plateau", "valley"}},
        // sailing
        {{"sailors", "ropes", "sails", "anchors", "gulls", "tides", "captains", "decks",
          "masts", "harbors"},
         {"compass", "lantern", "chart", "keel", "rudder", "buoy"},
         {"haul", "trim", "secure", "scrub", "watch", "mend", "lower", "raise"},
         {"salty", "heavy", "worn", "steady", "northern", "wet", "loyal", "swift"},
         {"harbor", "quay", "strait", "cove", "lighthouse", "shipyard"}},
        // baking
        {{"bakers", "loaves", "ovens", "crusts", "doughs", "pastries", "crumbs", "rolls",
          "tarts", "buns"},
         {"flour", "yeast", "honey", "butter", "oven", "ladle"},
         {"knead", "proof", "glaze", "slice", "bake", "cool", "dust", "fold"},
         {"warm", "golden", "soft", "sweet", "fresh", "crisp", "round", "dark"},
         {"bakery", "kitchen", "pantry", "market", "cellar", "mill"}},
        // geology
        {{"geologists", "fossils", "strata", "crystals", "boulders", "sediments", "faults",
          "minerals", "samples", "canyons"},
         {"quartz", "basalt", "hammer", "core", "vein", "ledge"},
         {"examine", "date", "split", "collect", "label", "compare", "uncover", "describe"},
         {"layered", "brittle", "volcanic", "coarse", "buried", "gray", "dense", "eroded"},
         {"quarry", "cliff", "basin", "cavern", "outcrop", "gorge"}},
        // orchards
        {{"farmers", "orchards", "apples", "branches", "ladders", "baskets", "bees",
          "blossoms", "roots", "harvests"},
         {"cider", "pruner", "graft", "trellis", "barrel", "fence"},
         {"prune", "gather", "plant", "water", "sort", "press", "tend", "store"},
         {"ripe", "young", "crooked", "shaded", "early", "dry", "tall", "green"},
         {"orchard", "meadow", "barn", "hillside", "grove", "farmstead"}},
        // weaving
        {{"weavers", "looms", "threads", "shuttles", "patterns", "fibers", "bobbins",
          "tapestries", "dyers", "spindles"},
         {"wool", "indigo", "warp", "weft", "loom", "skein"},
         {"spin", "dye", "thread", "weave", "knot", "stretch", "wind", "finish"},
         {"woven", "crimson", "fine", "tangled", "narrow", "pale", "striped", "soft"},
         {"workshop", "attic", "stall", "guildhall", "courtyard", "loft"}},
        // chess
        {{"players", "pawns", "knights", "bishops", "rooks", "openings", "endgames",
          "gambits", "masters", "clocks"},
         {"queen", "king", "board", "tempo", "file", "rank"},
         {"advance", "defend", "trade", "pin", "castle", "sacrifice", "block", "check"},
         {"quiet", "sharp", "closed", "open", "passive", "risky", "classical", "modern"},
         {"club", "tournament", "parlor", "plaza", "academy", "cafe"}},
        // carpentry
        {{"carpenters", "planks", "joints", "chisels", "beams", "panels", "dowels",
          "benches", "saws", "cabinets"},
         {"oak", "pine", "mallet", "plane", "vise", "lathe"},
         {"carve", "sand", "join", "clamp", "measure", "drill", "fit", "polish"},
         {"smooth", "square", "seasoned", "sturdy", "rough", "straight", "narrow", "oiled"},
         {"workshop", "lumberyard", "shed", "loft", "sawmill", "yard"}},
        // music
        {{"musicians", "violins", "melodies", "chords", "scores", "drummers", "flutes",
          "choirs", "rhythms", "strings"},
         {"cello", "tuning", "stage", "reed", "bow", "encore"},
         {"rehearse", "tune", "play", "conduct", "compose", "repeat", "hum", "perform"},
         {"slow", "bright", "minor", "gentle", "loud", "lively", "solemn", "familiar"},
         {"hall", "theater", "chapel", "square", "balcony", "conservatory"}},
        // fishing
        {{"fishers", "nets", "trouts", "boats", "hooks", "reels", "herrings", "floats",
          "baskets", "eels"},
         {"bait", "line", "creel", "skiff", "current", "shoal"},
         {"cast", "reel", "mend", "wade", "wait", "land", "release", "salt"},
         {"silver", "quick", "deep", "cold", "calm", "muddy", "early", "patient"},
         {"river", "pier", "estuary", "pond", "rapids", "shore"}},
        // herbalism
        {{"healers", "herbs", "roots", "tinctures", "leaves", "salves", "petals",
          "remedies", "seeds", "infusions"},
         {"sage", "nettle", "mortar", "pestle", "vial", "poultice"},
         {"dry", "grind", "steep", "mix", "apply", "harvest", "bottle", "prescribe"},
         {"bitter", "fragrant", "rare", "soothing", "wild", "potent", "dried", "pale"},
         {"garden", "apothecary", "greenhouse", "hedgerow", "cottage", "clearing"}},
        // clockmaking
        {{"clockmakers", "gears", "springs", "pendulums", "dials", "escapements", "wheels",
          "hands", "chimes", "movements"},
         {"mainspring", "jewel", "winder", "balance", "barrel", "pivot"},
         {"regulate", "oil", "assemble", "inspect", "adjust", "wind", "repair", "calibrate"},
         {"precise", "tiny", "brass", "silent", "steady", "delicate", "worn", "exact"},
         {"atelier", "tower", "arcade", "workbench", "vault", "showroom"}},
    };
}

// Zipf-flavored index: early entries dominate.
size_t zipfish(tacl::Rng& rng, size_t n) {
    double u = rng.uniform();
    return static_cast<size_t>(static_cast<double>(n) * u * u * 0.999);
}

std::string make_sentence(tacl::Rng& rng, const Topic& t) {
    auto noun = [&]() { return t.nouns[zipfish(rng, t.nouns.size())]; };
    auto thing = [&]() { return t.things[zipfish(rng, t.things.size())]; };
    auto verb = [&]() { return t.verbs[zipfish(rng, t.verbs.size())]; };
    auto adj = [&]() { return t.adjs[zipfish(rng, t.adjs.size())]; };
    auto place = [&]() { return t.places[zipfish(rng, t.places.size())]; };

    switch (rng.uniform_int(7)) {
        case 0:
            return "the " + adj() + " " + noun() + " " + verb() + " the " + thing() +
                   " near the " + place() + ".";
        case 1:
            return "the " + noun() + " " + verb() + " the " + thing() + " in the " + place() +
                   ".";
        case 2:
            return "some " + adj() + " " + noun() + " " + verb() + " under the " + adj() + " " +
                   place() + ".";
        case 3:
            return "the " + noun() + " of the " + place() + " " + verb() + " a " + adj() + " " +
                   thing() + ".";
        case 4:
            return "many " + noun() + " " + verb() + " the " + thing() + " and the " + thing() +
                   ".";
        case 5:
            return "the " + noun() + " and the " + noun() + " " + verb() + " in the " + adj() +
                   " " + place() + ".";
        default:
            return "every " + place() + " holds " + adj() + " " + noun() + " and a " + thing() +
                   ".";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fixture corpus generator"};
    std::string out_path;
    uint64_t seed = 7;
    int n_docs = 170;
    app.add_option("--out", out_path, "output file (default: stdout)");
    app.add_option("--seed", seed, "generator seed");
    app.add_option("--docs", n_docs, "number of documents");
    CLI11_PARSE(app, argc, argv);

    auto topics = make_topics();
    tacl::Rng rng(seed);

    std::ostringstream text;
    long long sentences = 0;
    for (int d = 0; d < n_docs; ++d) {
        const Topic& t = topics[static_cast<size_t>(rng.uniform_int(int(topics.size())))];
        int n_sent = 5 + rng.uniform_int(8);  // 5..12 sentences per document
        for (int s = 0; s < n_sent; ++s) {
            text << make_sentence(rng, t) << "\n";
            ++sentences;
        }
        text << "\n";
    }

    if (out_path.empty()) {
        std::cout << text.str();
    } else {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) {
            std::cerr << "cannot open " << out_path << "\n";
            return 1;
        }
        out << text.str();
        std::cerr << "wrote " << n_docs << " documents, " << sentences << " sentences to "
                  << out_path << "\n";
    }
    return 0;
}
