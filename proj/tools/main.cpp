#include <cstdio>

#include "cli.hpp"
#include "iibr/error.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"Inverse image-based rendering: light fields from a single image"};
    app.set_version_flag("--version", std::string(cli::version));
    app.require_subcommand(1);
    cli::register_scene_commands(app);
    cli::register_train_commands(app);
    cli::register_fx_commands(app);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const cli::UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        for (CLI::App* sub : app.get_subcommands())
            std::fprintf(stderr, "%s", sub->help().c_str());
        return 2;
    } catch (const iibr::Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", cli::stage().c_str(), e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error [%s]: %s\n", cli::stage().c_str(), e.what());
        return 1;
    }
    return 0;
}
