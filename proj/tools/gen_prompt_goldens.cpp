// Regenerates the rendered-prompt golden files after a template edit.
// Usage: gen_prompt_goldens <templates_dir> <output_dir>

#include "kappaforge/prompt.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace kappaforge;

int main(int argc, char** argv) {
    if (argc != 3) {
        std::fprintf(stderr, "usage: gen_prompt_goldens <templates_dir> <output_dir>\n");
        return 2;
    }
    TemplateLibrary templates = TemplateLibrary::load(argv[1]);
    std::filesystem::path out_dir(argv[2]);
    std::filesystem::create_directories(out_dir);

    const std::string body = "sold my soul for cases. would recommend.";
    int written = 0;
    for (Task task : published_tasks()) {
        for (Strategy strategy : all_strategies()) {
            for (const ModelProfile& profile : {default_profile(), llama_profile()}) {
                RenderedPrompt prompt = templates.render(task, strategy, profile, body);
                std::filesystem::path path =
                    out_dir / (task_slug(task) + "__" + strategy_slug(strategy) + "__" +
                               profile.profile_id + ".txt");
                std::ofstream out(path, std::ios::binary);
                out << prompt.text;
                ++written;
            }
        }
    }
    std::printf("wrote %d golden prompts to %s\n", written, argv[2]);
    return 0;
}
