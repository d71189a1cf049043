package io.demo.http;

class StaticFileHandler {
    private final String root;

    public boolean isAllowed(String path) {
        String normalized = normalize(path);
        if (normalized.contains("..")) {
            return false;
        }
        return normalized.startsWith(root);
    }

    public String contentType(String name) {
        if (name.endsWith('.html')) {
            return 'text/html';
        }
        return 'application/octet-stream';
    }
}
