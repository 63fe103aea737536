#pragma once

#include <sstream>
#include <string>

#include "gtdetect/model.hpp"
#include "gtdetect/rng.hpp"

namespace gtdetect::tools {

// Markdown table of every trainable parameter per family, built from the
// family defaults at a reference vocabulary of 1000 entries. The committed
// docs/parameter-shapes.md must match this output byte for byte; a test
// enforces it.
inline std::string parameter_shape_table() {
    std::ostringstream out;
    out << "# Parameter shapes\n\n"
        << "Reference configurations are the family defaults with a vocabulary of 1000\n"
        << "entries (998 corpus tokens plus PAD and UNK). Shapes are row-major; the\n"
        << "embedding row count tracks the vocabulary, everything else is fixed by the\n"
        << "configuration. Generated by the `gtdetect_shapes` tool; regenerate with\n"
        << "`gtdetect_shapes > docs/parameter-shapes.md` after changing an architecture.\n";

    for (const models::Family family :
         {models::Family::kMlp, models::Family::kCnn1d, models::Family::kSeparableCnn,
          models::Family::kTransformer}) {
        models::ModelConfig config = models::ModelConfig::defaults(family);
        config.vocab_size = 1000;
        Rng rng(0);
        const models::Model model = models::Model::build(config, rng);

        out << "\n## " << models::family_name(family) << "\n\n";
        out << "embed_dim " << config.embed_dim << ", max_len " << config.max_len;
        switch (family) {
            case models::Family::kMlp:
                out << ", hidden_dim " << config.hidden_dim;
                break;
            case models::Family::kCnn1d:
            case models::Family::kSeparableCnn:
                out << ", filters " << config.filters << ", kernel_widths [";
                for (std::size_t i = 0; i < config.kernel_widths.size(); ++i) {
                    if (i > 0) out << ", ";
                    out << config.kernel_widths[i];
                }
                out << "]";
                break;
            case models::Family::kTransformer:
                out << ", encoder_layers " << config.encoder_layers << ", heads "
                    << config.heads << ", ff_dim " << config.ff_dim;
                break;
        }
        out << ", pooling " << config.pooling << "\n\n";

        out << "| Parameter | Shape | Elements |\n";
        out << "| --- | --- | --- |\n";
        std::size_t total = 0;
        for (const models::NamedParam& param : model.parameters()) {
            const std::vector<std::size_t>& shape = param.tensor.shape();
            std::size_t elements = 1;
            out << "| " << param.name << " | ";
            if (shape.empty()) out << "scalar";
            for (std::size_t i = 0; i < shape.size(); ++i) {
                if (i > 0) out << " x ";
                out << shape[i];
                elements *= shape[i];
            }
            out << " | " << elements << " |\n";
            total += elements;
        }
        out << "\nTotal: " << total << " parameters\n";
    }
    return out.str();
}

}  // namespace gtdetect::tools
