/* Exercises the public header against the built static library. */

#include "glaudit.h"
#include <assert.h>
#include <stdio.h>
#include <string.h>

int main(void) {
    glaudit_lexicon_t *lexicon = NULL;
    assert(glaudit_lexicon_builtin(&lexicon) == GLAUDIT_OK);
    assert(glaudit_lexicon_term_count(lexicon) >= 40);

    char *neutral = NULL;
    assert(glaudit_degender_text(lexicon, "He is the father of two.", &neutral) == GLAUDIT_OK);
    assert(strcmp(neutral, "She is the mother of two.") == 0);
    glaudit_string_free(neutral);

    size_t count = 0;
    assert(glaudit_match_count(lexicon, "his brothers", &count) == GLAUDIT_OK);
    assert(count == 2);

    const char *tokens[] = {"leadership"};
    char *masked = NULL;
    assert(glaudit_mask_text("her leadership shone", tokens, 1, "[MASK]", &masked) == GLAUDIT_OK);
    assert(strcmp(masked, "her [MASK] shone") == 0);
    glaudit_string_free(masked);

    assert(glaudit_degender_text(NULL, "x", &neutral) == GLAUDIT_ERR_USAGE);
    char *err = glaudit_last_error_message();
    assert(err != NULL && strlen(err) > 0);
    glaudit_string_free(err);

    glaudit_lexicon_free(lexicon);
    printf("c header smoke ok (version %s)\n", glaudit_version());
    return 0;
}
