// fpsearch: enroll, search, re-rank and benchmark fixed-length fingerprint
// templates from the command line. All outputs are machine-readable
// (tab-separated rows or JSON) and deterministic for a fixed --seed.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fpsearch/bench.hpp"
#include "fpsearch/errors.hpp"
#include "fpsearch/gallery.hpp"
#include "fpsearch/io_util.hpp"
#include "fpsearch/minutiae.hpp"
#include "fpsearch/pq.hpp"
#include "fpsearch/rerank.hpp"
#include "fpsearch/search.hpp"
#include "fpsearch/synth.hpp"
#include "fpsearch/template.hpp"

namespace {

using namespace fpsearch;

CompressedTemplate load_compressed(const std::string& path) {
    auto bytes = read_file_bytes(path);
    return CompressedTemplate::deserialize(bytes);
}

Template load_probe_template(const std::string& path) {
    return decompress(load_compressed(path));
}

void print_candidates(const CandidateList& list) {
    std::printf("rank\tsubject_id\tfinger\tscore\n");
    for (std::size_t i = 0; i < list.items.size(); ++i) {
        const Candidate& c = list.items[i];
        std::printf("%zu\t%s\t%d\t%.9f\n", i + 1, c.subject_id.c_str(), c.finger_index,
                    c.score.value);
    }
}

int cmd_enroll(const std::string& manifest_path, const std::string& out_path) {
    Gallery gallery;
    std::istringstream lines(read_file_text(manifest_path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(lines, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#')
            continue;
        std::istringstream fields(line);
        GalleryRecord rec;
        std::string tpl_path, minu_path;
        if (!(fields >> rec.subject_id >> rec.finger_index >> tpl_path))
            throw InvalidInputError("manifest line " + std::to_string(lineno) +
                                    ": expected \"id finger template-path [minutiae-path]\"");
        rec.tpl = load_compressed(tpl_path);
        if (fields >> minu_path)
            rec.minutiae = load_set(minu_path);
        gallery.enroll(std::move(rec));
    }
    gallery.save(out_path);
    std::printf("enrolled\t%zu\n", gallery.size());
    return 0;
}

int cmd_verify(const std::string& a_path, const std::string& b_path, const std::string& ma_path,
               const std::string& mb_path, bool integer_domain) {
    auto ca = load_compressed(a_path);
    auto cb = load_compressed(b_path);
    if (integer_domain) {
        auto s = integer_score(ca, cb);
        std::printf("score\t%.9f\n", s.value);
        return 0;
    }
    Template a = decompress(ca), b = decompress(cb);
    if (!ma_path.empty() || !mb_path.empty()) {
        if (ma_path.empty() || mb_path.empty())
            throw InvalidInputError("fused verify needs both --minutiae-a and --minutiae-b");
        auto s = fused_verify(a, b, load_set(ma_path), load_set(mb_path));
        std::printf("score\t%.9f\n", s.value);
        return 0;
    }
    std::printf("score\t%.9f\n", cosine_score(a, b).value);
    return 0;
}

int cmd_search(const std::string& gallery_path, const std::string& probe_path, std::size_t k,
               int threads, bool rerank, const std::string& probe_minutiae_path,
               const std::string& fusion_norm, const std::string& pq_path) {
    Gallery gallery = Gallery::load(gallery_path);
    Template probe = load_probe_template(probe_path);
    TemplateMatrix matrix = TemplateMatrix::from_gallery(gallery);
    if (rerank) {
        if (probe_minutiae_path.empty())
            throw InvalidInputError("--rerank needs --probe-minutiae");
        FusionConfig cfg;
        cfg.k = k;
        cfg.threads = threads;
        cfg.normalization = fusion_norm == "minmax" ? FusionNormalization::kMinMaxOverCandidates
                                                    : FusionNormalization::kNone;
        PqIndex index;
        if (!pq_path.empty()) {
            index = PqIndex::load(pq_path);
            cfg.backend = Stage1Backend::kPq;
        }
        auto list = two_stage_search(probe, load_set(probe_minutiae_path), gallery, matrix,
                                     pq_path.empty() ? nullptr : &index, cfg);
        print_candidates(list);
        return 0;
    }
    auto list = search_topk(gallery, matrix, probe, k, SearchOptions{threads});
    print_candidates(list);
    return 0;
}

int cmd_pq_train(const std::string& gallery_path, const std::string& out_path, int m, int z,
                 std::uint64_t seed, std::size_t max_train, int threads) {
    Gallery gallery = Gallery::load(gallery_path);
    TemplateMatrix matrix = TemplateMatrix::from_gallery(gallery);
    PqParams params;
    params.m = m;
    params.z = z;
    params.seed = seed;
    params.max_train_samples = max_train;
    params.threads = threads;
    PqIndex index = PqIndex::train(matrix, params);
    index.add_matrix(matrix);
    index.save(out_path);
    std::printf("trained\tm=%d\tz=%d\trecords=%zu\tcode_bytes=%zu\n", index.sub_count(),
                index.codebook_size(), index.size(), index.code_bytes());
    return 0;
}

int cmd_pq_search(const std::string& gallery_path, const std::string& index_path,
                  const std::string& probe_path, std::size_t k, int threads) {
    Gallery gallery = Gallery::load(gallery_path);
    PqIndex index = PqIndex::load(index_path);
    Template probe = load_probe_template(probe_path);
    auto list = pq_search_topk(gallery, index, probe, k, SearchOptions{threads});
    print_candidates(list);
    return 0;
}

int cmd_mmap_encode(const std::string& set_path, const std::string& map_path, int map_w,
                    int map_h, double sigma) {
    MinutiaeSet set = load_set(set_path);
    MapEncodeOptions opts;
    opts.sigma = sigma;
    save_map(encode_map(set, map_w, map_h, opts), map_path);
    return 0;
}

int cmd_mmap_decode(const std::string& map_path, const std::string& set_path, double threshold,
                    double nms_radius) {
    MinutiaeMap map = load_map(map_path);
    MapDecodeOptions opts;
    opts.peak_threshold = threshold;
    opts.nms_radius = nms_radius;
    MinutiaeSet set = decode_map(map, opts);
    if (set_path.empty())
        std::fputs(set_to_text(set).c_str(), stdout);
    else
        save_set(set, set_path);
    return 0;
}

int cmd_bench(std::size_t n, const std::string& backend, const std::string& report_path,
              std::uint64_t seed, double noise_sigma, int threads, std::size_t k,
              const std::string& manifest_path) {
    if (!manifest_path.empty()) {
        auto manifest = ExperimentManifest::load(manifest_path);
        auto result = run_experiment(manifest, threads);
        std::puts(result.report_json.c_str());
        if (!report_path.empty())
            write_file_text(report_path, result.report_json);
        std::printf("%s\t%s\n", result.passed ? "PASS" : "FAIL", manifest.name.c_str());
        return result.passed ? 0 : 1;
    }

    SynthConfig cfg;
    cfg.identities = n;
    cfg.noise_sigma = noise_sigma;
    cfg.seed = seed;
    cfg.with_minutiae = backend == "rerank";
    SynthData data = generate(cfg);

    EvalConfig eval_cfg;
    eval_cfg.cmc_max_rank = k;
    eval_cfg.threads = threads;
    PqIndex index;
    if (backend == "exact") {
        eval_cfg.backend = EvalBackend::kExact;
    } else if (backend == "pq") {
        TemplateMatrix matrix = TemplateMatrix::from_gallery(data.gallery);
        PqParams params;
        params.seed = seed;
        params.threads = threads;
        params.max_train_samples = 100000;
        index = PqIndex::train(matrix, params);
        index.add_matrix(matrix);
        eval_cfg.backend = EvalBackend::kPq;
        eval_cfg.index = &index;
    } else if (backend == "rerank") {
        eval_cfg.backend = EvalBackend::kRerank;
    } else {
        throw InvalidInputError("unknown backend: " + backend);
    }
    EvalReport report = evaluate(data, eval_cfg);
    std::puts(report.to_json().c_str());
    if (!report_path.empty())
        write_file_text(report_path, report.to_json());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fixed-length fingerprint template matching and search"};
    app.require_subcommand(1);

    int threads = 0;
    std::uint64_t seed = 1;
    app.add_option("--threads", threads, "worker thread cap (0: all cores)");
    app.add_option("--seed", seed, "seed for all randomized steps");

    // enroll
    auto* enroll = app.add_subcommand("enroll", "build a gallery from a manifest");
    std::string enroll_manifest, enroll_out;
    enroll->add_option("--manifest", enroll_manifest,
                       "text manifest: id finger template-path [minutiae-path]")
        ->required();
    enroll->add_option("--out", enroll_out, "gallery output path")->required();

    // verify
    auto* verify = app.add_subcommand("verify", "1:1 match of two compressed templates");
    std::string verify_a, verify_b, verify_ma, verify_mb;
    bool verify_int = false;
    verify->add_option("--a", verify_a, "first 200-byte template")->required();
    verify->add_option("--b", verify_b, "second 200-byte template")->required();
    verify->add_option("--minutiae-a", verify_ma, "minutiae set for fused verification");
    verify->add_option("--minutiae-b", verify_mb, "minutiae set for fused verification");
    verify->add_flag("--integer", verify_int, "score via the integer-domain path");

    // search
    auto* search = app.add_subcommand("search", "top-k identification against a gallery");
    std::string search_gallery, search_probe, search_pminu, search_norm = "none", search_pq;
    std::size_t search_k = 10;
    bool search_rerank = false;
    search->add_option("--gallery", search_gallery, "gallery file")->required();
    search->add_option("--probe", search_probe, "200-byte probe template")->required();
    search->add_option("--k", search_k, "candidate count");
    search->add_flag("--rerank", search_rerank, "re-rank candidates with the minutiae matcher");
    search->add_option("--probe-minutiae", search_pminu, "probe minutiae set (for --rerank)");
    search->add_option("--fusion", search_norm, "minutiae score normalization: none|minmax");
    search->add_option("--pq-index", search_pq, "serve stage 1 from this PQ index");

    // pq-train
    auto* pq_train = app.add_subcommand("pq-train", "train a PQ index over a gallery");
    std::string pqt_gallery, pqt_out;
    int pqt_m = 64, pqt_z = 256;
    std::size_t pqt_cap = 0;
    pq_train->add_option("--gallery", pqt_gallery, "gallery file")->required();
    pq_train->add_option("--out", pqt_out, "index output path")->required();
    pq_train->add_option("--m", pqt_m, "sub-vector count");
    pq_train->add_option("--z", pqt_z, "centroids per codebook");
    pq_train->add_option("--max-train-samples", pqt_cap, "cap on training vectors (0: all)");

    // pq-search
    auto* pq_search = app.add_subcommand("pq-search", "top-k via asymmetric PQ distances");
    std::string pqs_gallery, pqs_index, pqs_probe;
    std::size_t pqs_k = 10;
    pq_search->add_option("--gallery", pqs_gallery, "gallery file")->required();
    pq_search->add_option("--index", pqs_index, "PQ index file")->required();
    pq_search->add_option("--probe", pqs_probe, "200-byte probe template")->required();
    pq_search->add_option("--k", pqs_k, "candidate count");

    // mmap
    auto* mmap = app.add_subcommand("mmap", "minutiae-map encode/decode");
    mmap->require_subcommand(1);
    auto* mmap_encode = mmap->add_subcommand("encode", "minutiae set -> 6-channel map");
    std::string me_set, me_map;
    int me_w = 128, me_h = 128;
    double me_sigma = 1.5;
    mmap_encode->add_option("--set", me_set, "minutiae set (text)")->required();
    mmap_encode->add_option("--out", me_map, "map output path")->required();
    mmap_encode->add_option("--width", me_w, "map width");
    mmap_encode->add_option("--height", me_h, "map height");
    mmap_encode->add_option("--sigma", me_sigma, "gaussian width in map pixels");
    auto* mmap_decode = mmap->add_subcommand("decode", "6-channel map -> minutiae set");
    std::string md_map, md_set;
    double md_threshold = 0.25, md_nms = 3.0;
    mmap_decode->add_option("--map", md_map, "map file")->required();
    mmap_decode->add_option("--out", md_set, "set output path (default: stdout)");
    mmap_decode->add_option("--threshold", md_threshold, "peak threshold");
    mmap_decode->add_option("--nms-radius", md_nms, "suppression radius in map pixels");

    // bench
    auto* bench = app.add_subcommand("bench", "synthetic benchmark / experiment manifest");
    std::size_t bench_n = 10000, bench_k = 20;
    std::string bench_backend = "exact", bench_report, bench_manifest;
    double bench_sigma = 0.35;
    bench->add_option("--n", bench_n, "gallery size (identities)");
    bench->add_option("--backend", bench_backend, "exact|pq|rerank");
    bench->add_option("--report", bench_report, "write the JSON report here");
    bench->add_option("--noise-sigma", bench_sigma, "within-class noise level");
    bench->add_option("--k", bench_k, "CMC depth");
    bench->add_option("--manifest", bench_manifest, "run a named experiment manifest");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*enroll)
            return cmd_enroll(enroll_manifest, enroll_out);
        if (*verify)
            return cmd_verify(verify_a, verify_b, verify_ma, verify_mb, verify_int);
        if (*search)
            return cmd_search(search_gallery, search_probe, search_k, threads, search_rerank,
                              search_pminu, search_norm, search_pq);
        if (*pq_train)
            return cmd_pq_train(pqt_gallery, pqt_out, pqt_m, pqt_z, seed, pqt_cap, threads);
        if (*pq_search)
            return cmd_pq_search(pqs_gallery, pqs_index, pqs_probe, pqs_k, threads);
        if (*mmap) {
            if (*mmap_encode)
                return cmd_mmap_encode(me_set, me_map, me_w, me_h, me_sigma);
            return cmd_mmap_decode(md_map, md_set, md_threshold, md_nms);
        }
        if (*bench)
            return cmd_bench(bench_n, bench_backend, bench_report, seed, bench_sigma, threads,
                             bench_k, bench_manifest);
    } catch (const InvalidInputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
