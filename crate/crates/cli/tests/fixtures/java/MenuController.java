package app.ui;

import javafx.event.ActionEvent;
import javafx.fxml.FXML;
import javafx.scene.control.Button;
import javafx.scene.control.Label;

public class MenuController {
    @FXML
    private Button startButton;
    @FXML
    private Label status;

    @FXML
    public void initialize() {
        startButton.setOnAction(e -> status.setText("started"));
    }

    @FXML
    private void handleQuit(ActionEvent event) {
        status.setText("bye");
        javafx.application.Platform.exit();
    }
}
