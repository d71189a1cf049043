package io.demo.http;

class StaticFileHandler {
    private final String root;

    public boolean isAllowed(String path) {
        return path.startsWith(root);
    }

    public String contentType(String name) {
        if (name.endsWith(".html")) {
            return "text/html";
        }
        return "application/octet-stream";
    }
}
