#include <stdio.h>
#include <string.h>
#include "ipfs.h"

int main(void) {
    uint8_t secret[32] = {1};
    IpfsNode *node = NULL;
    if (ipfs_node_new(secret, &node) != IPFS_STATUS_OK) return 1;
    const char *text = "hello from c";
    char *hash = NULL;
    if (ipfs_node_add(node, (const uint8_t *)text, strlen(text), &hash) != IPFS_STATUS_OK) return 2;
    uint8_t *data = NULL;
    uintptr_t len = 0;
    if (ipfs_node_cat(node, hash, &data, &len) != IPFS_STATUS_OK) return 3;
    if (len != strlen(text) || memcmp(data, text, len) != 0) return 4;
    ipfs_bytes_free(data, len);
    if (ipfs_node_cat(node, "QmNope", &data, &len) == IPFS_STATUS_OK) return 5;
    printf("%s\n", ipfs_last_error_message());
    ipfs_string_free(hash);
    ipfs_node_free(node);
    return 0;
}
